#pragma once

#include <ostream>

#include "workspace.hpp"

namespace cytobench::cli {

void cmd_normalize(const Context& ctx, std::ostream& out);
void cmd_detect(const Context& ctx, std::ostream& out);
void cmd_expand(const Context& ctx, std::ostream& out);
void cmd_cyto(const Context& ctx, std::ostream& out);
void cmd_features(const Context& ctx, std::ostream& out);
void cmd_eval(const Context& ctx, std::ostream& out);
void cmd_sweep(const Context& ctx, std::ostream& out);
void cmd_report(const Context& ctx, std::ostream& out);

}  // namespace cytobench::cli
