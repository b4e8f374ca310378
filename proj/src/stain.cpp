#include "cytobench/stain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "cytobench/error.hpp"

namespace cytobench::stain {

namespace {

using Vec3 = std::array<double, 3>;

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// Lookup of OD per 8-bit intensity for one background level.
std::array<double, 256> od_table(int background_intensity) {
  std::array<double, 256> t{};
  for (int i = 0; i < 256; ++i) t[static_cast<std::size_t>(i)] = intensity_to_od(i, background_intensity);
  return t;
}

void check_background(int background_intensity) {
  if (background_intensity < 1 || background_intensity > 255) {
    throw InvalidArgument("background intensity must lie in [1, 255]");
  }
}

// Rows of the 2x3 least-squares solver (M^T M)^-1 M^T for M = [h e].
struct Unmixer {
  Vec3 h_row{};
  Vec3 e_row{};

  explicit Unmixer(const StainProfile& p) {
    const Vec3& h = p.hematoxylin;
    const Vec3& e = p.eosin;
    const double hh = h[0] * h[0] + h[1] * h[1] + h[2] * h[2];
    const double ee = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
    const double he = h[0] * e[0] + h[1] * e[1] + h[2] * e[2];
    const double det = hh * ee - he * he;
    if (!(det > 1e-8 * hh * ee)) throw InvalidArgument("stain matrix is degenerate (collinear stains)");
    for (int k = 0; k < 3; ++k) {
      h_row[static_cast<std::size_t>(k)] = (ee * h[static_cast<std::size_t>(k)] - he * e[static_cast<std::size_t>(k)]) / det;
      e_row[static_cast<std::size_t>(k)] = (hh * e[static_cast<std::size_t>(k)] - he * h[static_cast<std::size_t>(k)]) / det;
    }
  }

  std::array<double, 2> operator()(double o0, double o1, double o2) const {
    return {h_row[0] * o0 + h_row[1] * o1 + h_row[2] * o2, e_row[0] * o0 + e_row[1] * o1 + e_row[2] * o2};
  }
};

}  // namespace

void StainProfile::validate() const {
  for (const Vec3* col : {&hematoxylin, &eosin}) {
    if (std::abs(norm3(*col) - 1.0) > 1e-9) throw InvalidArgument("stain column is not unit length");
    for (double v : *col) {
      if (!(v >= 0.0)) throw InvalidArgument("stain matrix has a negative entry");
    }
  }
  if (!(max_concentrations[0] > 0.0) || !(max_concentrations[1] > 0.0)) {
    throw InvalidArgument("max concentrations must be positive");
  }
}

StainProfile make_profile(Vec3 hematoxylin, Vec3 eosin, std::array<double, 2> max_concentrations) {
  auto unit = [](Vec3 v) {
    for (double& x : v) x = std::max(x, 0.0);
    const double n = norm3(v);
    if (!(n > 0.0)) throw InvalidArgument("stain column vanishes");
    for (double& x : v) x /= n;
    return v;
  };
  StainProfile p{unit(hematoxylin), unit(eosin), max_concentrations};
  p.validate();
  return p;
}

StainProfile reference_profile() {
  return make_profile({0.65, 0.70, 0.29}, {0.07, 0.99, 0.11}, {1.9705, 1.0308});
}

double intensity_to_od(int intensity, int background_intensity) {
  return -std::log10((intensity + 1.0) / (background_intensity + 1.0));
}

std::uint8_t od_to_intensity(double od, int background_intensity) {
  const double v = (background_intensity + 1.0) * std::pow(10.0, -od) - 1.0;
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

OdImage rgb_to_od(const ImagePatch& patch, int background_intensity) {
  check_background(background_intensity);
  const auto table = od_table(background_intensity);
  OdImage out{patch.width(), patch.height(), std::vector<double>(patch.pixels().size())};
  const auto& px = patch.pixels();
  const long n = static_cast<long>(px.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) out.od[static_cast<std::size_t>(i)] = table[px[static_cast<std::size_t>(i)]];
  return out;
}

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidArgument("percentile of an empty sample");
  const double n = static_cast<double>(values.size());
  const double rank = std::ceil(p / 100.0 * n);
  const std::size_t idx = rank < 1.0 ? 0 : std::min(values.size() - 1, static_cast<std::size_t>(rank) - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<long>(idx), values.end());
  return values[idx];
}

StainProfile estimate_stain_matrix(const OdImage& od, const MacenkoParams& params) {
  if (od.pixel_count() == 0) throw InvalidArgument("empty OD raster");

  // Tissue pixels in lexicographic OD order: every accumulation below then
  // sees the same sequence regardless of the input pixel order.
  std::vector<std::size_t> tissue;
  for (std::size_t i = 0; i < od.pixel_count(); ++i) {
    if (norm3(od.at(i)) >= params.beta) tissue.push_back(i);
  }
  if (tissue.size() < params.min_tissue_pixels) {
    throw NoTissueError("only " + std::to_string(tissue.size()) + " tissue pixels after background removal");
  }
  std::sort(tissue.begin(), tissue.end(), [&od](std::size_t a, std::size_t b) { return od.at(a) < od.at(b); });

  // Run-length groups of identical OD triples.
  struct Group {
    Vec3 v;
    double count;
  };
  std::vector<Group> groups;
  for (std::size_t i : tissue) {
    const Vec3 v = od.at(i);
    if (!groups.empty() && groups.back().v == v) {
      groups.back().count += 1.0;
    } else {
      groups.push_back({v, 1.0});
    }
  }
  const double total = static_cast<double>(tissue.size());

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const Group& g : groups) mean += g.count * Eigen::Vector3d(g.v[0], g.v[1], g.v[2]);
  mean /= total;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Group& g : groups) {
    const Eigen::Vector3d d = Eigen::Vector3d(g.v[0], g.v[1], g.v[2]) - mean;
    cov += g.count * d * d.transpose();
  }
  cov /= total;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  Eigen::Vector3d v1 = solver.eigenvectors().col(2);
  Eigen::Vector3d v2 = solver.eigenvectors().col(1);
  if (v1.sum() < 0.0) v1 = -v1;
  if (v2.sum() < 0.0) v2 = -v2;

  std::vector<double> angles;
  angles.reserve(tissue.size());
  for (const Group& g : groups) {
    const Eigen::Vector3d v(g.v[0], g.v[1], g.v[2]);
    const double phi = std::atan2(v.dot(v2), v.dot(v1));
    angles.insert(angles.end(), static_cast<std::size_t>(g.count), phi);
  }
  const double phi_lo = nearest_rank_percentile(angles, params.alpha_percentile);
  const double phi_hi = nearest_rank_percentile(angles, 100.0 - params.alpha_percentile);
  const Eigen::Vector3d a = v1 * std::cos(phi_lo) + v2 * std::sin(phi_lo);
  const Eigen::Vector3d b = v1 * std::cos(phi_hi) + v2 * std::sin(phi_hi);
  const bool a_is_h = a[0] > b[0];
  const Eigen::Vector3d& hv = a_is_h ? a : b;
  const Eigen::Vector3d& ev = a_is_h ? b : a;

  StainProfile profile;
  try {
    profile = make_profile({hv[0], hv[1], hv[2]}, {ev[0], ev[1], ev[2]}, {1.0, 1.0});
  } catch (const InvalidArgument&) {
    throw NoTissueError("stain directions vanish after clamping");
  }

  const Unmixer unmix(profile);
  std::vector<double> hc, ec;
  hc.reserve(tissue.size());
  ec.reserve(tissue.size());
  for (const Group& g : groups) {
    const auto c = unmix(g.v[0], g.v[1], g.v[2]);
    hc.insert(hc.end(), static_cast<std::size_t>(g.count), c[0]);
    ec.insert(ec.end(), static_cast<std::size_t>(g.count), c[1]);
  }
  profile.max_concentrations = {nearest_rank_percentile(std::move(hc), 99.0),
                                nearest_rank_percentile(std::move(ec), 99.0)};
  if (!(profile.max_concentrations[0] > 0.0) || !(profile.max_concentrations[1] > 0.0)) {
    throw NoTissueError("stain concentrations vanish");
  }
  return profile;
}

StainProfile estimate_stain_matrix(const ImagePatch& patch, const MacenkoParams& params) {
  return estimate_stain_matrix(rgb_to_od(patch, params.background_intensity), params);
}

ConcentrationMap deconvolve(const ImagePatch& patch, const StainProfile& profile, int background_intensity,
                            bool clamp_negative) {
  check_background(background_intensity);
  const Unmixer unmix(profile);
  const auto table = od_table(background_intensity);
  const std::size_t n = patch.pixel_count();
  ConcentrationMap out{patch.width(), patch.height(), std::vector<double>(n), std::vector<double>(n)};
  const auto& px = patch.pixels();
#pragma omp parallel for schedule(static)
  for (long li = 0; li < static_cast<long>(n); ++li) {
    const auto i = static_cast<std::size_t>(li);
    auto c = unmix(table[px[3 * i]], table[px[3 * i + 1]], table[px[3 * i + 2]]);
    if (clamp_negative) {
      c[0] = std::max(c[0], 0.0);
      c[1] = std::max(c[1], 0.0);
    }
    out.h[i] = c[0];
    out.e[i] = c[1];
  }
  return out;
}

Rgb compose(const StainProfile& profile, double h, double e, int background_intensity) {
  Rgb out{};
  for (std::size_t k = 0; k < 3; ++k) {
    out[k] = od_to_intensity(profile.hematoxylin[k] * h + profile.eosin[k] * e, background_intensity);
  }
  return out;
}

ImagePatch normalize(const ImagePatch& patch, const StainProfile& source, const StainProfile& target,
                     int background_intensity) {
  check_background(background_intensity);
  source.validate();
  target.validate();
  const Unmixer unmix(source);
  const auto table = od_table(background_intensity);
  const double sh = target.max_concentrations[0] / source.max_concentrations[0];
  const double se = target.max_concentrations[1] / source.max_concentrations[1];
  const std::size_t n = patch.pixel_count();
  std::vector<std::uint8_t> out(patch.pixels().size());
  const auto& px = patch.pixels();
#pragma omp parallel for schedule(static)
  for (long li = 0; li < static_cast<long>(n); ++li) {
    const auto i = static_cast<std::size_t>(li);
    const auto c = unmix(table[px[3 * i]], table[px[3 * i + 1]], table[px[3 * i + 2]]);
    const Rgb v = compose(target, std::max(c[0], 0.0) * sh, std::max(c[1], 0.0) * se, background_intensity);
    out[3 * i] = v[0];
    out[3 * i + 1] = v[1];
    out[3 * i + 2] = v[2];
  }
  return ImagePatch(patch.width(), patch.height(), std::move(out), patch.scale(), patch.patient_id(),
                    patch.patch_id());
}

std::string profile_to_json(const StainProfile& profile) {
  nlohmann::ordered_json j;
  j["hematoxylin"] = profile.hematoxylin;
  j["eosin"] = profile.eosin;
  j["max_concentrations"] = profile.max_concentrations;
  return j.dump(2);
}

StainProfile profile_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("stain profile: ") + e.what(), e.byte == 0 ? 0 : e.byte - 1);
  }
  try {
    StainProfile p{j.at("hematoxylin").get<Vec3>(), j.at("eosin").get<Vec3>(),
                   j.at("max_concentrations").get<std::array<double, 2>>()};
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("stain profile: ") + e.what());
  }
}

}  // namespace cytobench::stain
