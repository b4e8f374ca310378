#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cytobench/error.hpp"
#include "cytobench/evaluation.hpp"

using namespace cytobench;
using namespace cytobench::eval;

namespace {

// Independent AP: explicit selection ranking, greedy match, and the
// interpolated precision max{p_k : recall_k >= r} with integer recall tests.
double oracle_ap(const std::vector<PatchDetections>& patches, double thr) {
  struct Det {
    double score, area;
    std::size_t patch, idx;
  };
  std::vector<Det> dets;
  std::size_t ng = 0;
  for (std::size_t p = 0; p < patches.size(); ++p) {
    ng += patches[p].num_gold;
    for (std::size_t i = 0; i < patches[p].scores.size(); ++i) dets.push_back({patches[p].scores[i], patches[p].areas[i], p, i});
  }
  auto before = [](const Det& a, const Det& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.area != b.area) return a.area > b.area;
    if (a.patch != b.patch) return a.patch < b.patch;
    return a.idx < b.idx;
  };
  std::vector<Det> ranked;
  std::vector<bool> used(dets.size(), false);
  for (std::size_t k = 0; k < dets.size(); ++k) {
    std::size_t best = dets.size();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!used[i] && (best == dets.size() || before(dets[i], dets[best]))) best = i;
    }
    used[best] = true;
    ranked.push_back(dets[best]);
  }
  std::vector<std::vector<bool>> taken;
  for (const auto& p : patches) taken.emplace_back(p.num_gold, false);
  std::vector<std::size_t> tp_at;
  std::size_t tp = 0;
  for (const Det& d : ranked) {
    const auto& row = patches[d.patch].iou[d.idx];
    int g_best = -1;
    for (std::size_t g = 0; g < row.size(); ++g) {
      if (taken[d.patch][g] || row[g] < thr) continue;
      if (g_best < 0 || row[g] > row[static_cast<std::size_t>(g_best)]) g_best = static_cast<int>(g);
    }
    if (g_best >= 0) {
      taken[d.patch][static_cast<std::size_t>(g_best)] = true;
      ++tp;
    }
    tp_at.push_back(tp);
  }
  double sum = 0.0;
  for (std::size_t r = 0; r <= 100; ++r) {
    double best = 0.0;
    for (std::size_t k = 0; k < tp_at.size(); ++k) {
      if (tp_at[k] * 100 >= r * ng) best = std::max(best, static_cast<double>(tp_at[k]) / static_cast<double>(k + 1));
    }
    sum += best;
  }
  return 100.0 * sum / 101.0;
}

double oracle_ks(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  double d = 0.0;
  for (double x : pooled) {
    const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; })) / a.size();
    const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; })) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

PatchDetections single(std::vector<double> scores, std::vector<std::vector<double>> iou, std::size_t ng) {
  PatchDetections p;
  p.scores = std::move(scores);
  p.areas.assign(p.scores.size(), 10.0);
  p.iou = std::move(iou);
  p.num_gold = ng;
  return p;
}

}  // namespace

TEST_CASE("mask IoU") {
  Mask a(30, 30);
  Mask b(30, 30);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      a.set(x, y);
      b.set(x + 5, y);
    }
  }
  CHECK(mask_iou(a, a) == 1.0);
  CHECK(mask_iou(a, b) == doctest::Approx(50.0 / 150.0));
  CHECK(mask_iou(a, Mask(30, 30)) == 0.0);
  CHECK(mask_iou(Mask(30, 30), Mask(30, 30)) == 0.0);
  CHECK_THROWS_AS(mask_iou(a, Mask(10, 10)), InvalidArgument);
  const BoxedMask ba = boxed_mask(make_rectangle(0, 0, 10, 10), 30, 30);
  const BoxedMask bb = boxed_mask(make_rectangle(5, 0, 10, 10), 30, 30);
  CHECK(iou(ba, bb) == mask_iou(a, b));
  CHECK(iou(ba, boxed_mask(make_rectangle(20, 20, 5, 5), 30, 30)) == 0.0);
}

TEST_CASE("average precision examples") {
  const std::vector<PatchDetections> one{single({1.0}, {{0.6}}, 1)};
  CHECK(average_precision(one, 0.5) == doctest::Approx(100.0));
  CHECK(average_precision(one, 0.75) == 0.0);

  const std::vector<PatchDetections> exact{single({1.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}}, 2)};
  CHECK(average_precision(exact, 0.5) == doctest::Approx(100.0));
  CHECK(average_precision(exact, 0.75) == doctest::Approx(100.0));

  const std::vector<PatchDetections> half{single({0.9, 0.8}, {{0.9, 0.0}, {0.0, 0.0}}, 2)};
  CHECK(average_precision(half, 0.5) == doctest::Approx(100.0 * 51.0 / 101.0));
  CHECK(average_precision(half, 0.5) == doctest::Approx(50.495).epsilon(1e-4));

  const std::vector<PatchDetections> none{single({}, {}, 3)};
  CHECK(average_precision(none, 0.5) == 0.0);
  CHECK_THROWS_AS(average_precision(std::vector<PatchDetections>{single({1.0}, {{}}, 0)}, 0.5), InvalidArgument);
}

TEST_CASE("AP engine equals the oracle on 1000 random cases") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> small(0, 5);
  const double ious[] = {0.0, 0.0, 0.2, 0.5, 0.6, 0.75, 0.8, 0.95, 1.0};
  const double scores[] = {0.3, 0.5, 0.5, 0.9, 1.0};
  for (int trial = 0; trial < 1000; ++trial) {
    const int npatch = 1 + small(rng) % 3;
    int det_left = small(rng);
    int gold_left = 1 + small(rng) % 5;
    std::vector<PatchDetections> patches(static_cast<std::size_t>(npatch));
    for (int p = 0; p < npatch; ++p) {
      const bool last = p == npatch - 1;
      const int nd = last ? det_left : std::uniform_int_distribution<int>(0, det_left)(rng);
      const int ng = last ? gold_left : std::uniform_int_distribution<int>(0, gold_left)(rng);
      det_left -= nd;
      gold_left -= ng;
      PatchDetections& pd = patches[static_cast<std::size_t>(p)];
      pd.num_gold = static_cast<std::size_t>(ng);
      for (int d = 0; d < nd; ++d) {
        pd.scores.push_back(scores[std::uniform_int_distribution<int>(0, 4)(rng)]);
        pd.areas.push_back(static_cast<double>(std::uniform_int_distribution<int>(1, 3)(rng)));
        std::vector<double> row;
        for (int g = 0; g < ng; ++g) row.push_back(ious[std::uniform_int_distribution<int>(0, 8)(rng)]);
        pd.iou.push_back(row);
      }
    }
    const double ap50 = average_precision(patches, 0.5);
    const double ap75 = average_precision(patches, 0.75);
    CHECK(ap50 == doctest::Approx(oracle_ap(patches, 0.5)).epsilon(1e-12));
    CHECK(ap75 == doctest::Approx(oracle_ap(patches, 0.75)).epsilon(1e-12));
    CHECK(ap75 <= ap50);
    CHECK(ap50 >= 0.0);
    CHECK(ap50 <= 100.0 + 1e-9);
  }
}

TEST_CASE("KS statistic examples") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(ks_statistic(a, a) == 0.0);
  CHECK(ks_statistic(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
  CHECK(ks_statistic(a, std::vector<double>{2, 3, 4, 5}) == 0.25);
  CHECK_THROWS_AS(ks_statistic(a, std::vector<double>{}), InvalidArgument);
}

TEST_CASE("KS engine equals the pooled-CDF oracle on 1000 random pairs") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 50);
  for (int trial = 0; trial < 1000; ++trial) {
    const bool ties = trial % 2 == 0;
    const double shift = (trial % 5) * 0.3;
    std::vector<double> a(static_cast<std::size_t>(len(rng)));
    std::vector<double> b(static_cast<std::size_t>(len(rng)));
    for (double& v : a) v = ties ? std::round(n01(rng) * 3) / 3 : n01(rng);
    for (double& v : b) v = ties ? std::round((n01(rng) + shift) * 3) / 3 : n01(rng) + shift;
    const double d = ks_statistic(a, b);
    CHECK(d == oracle_ks(a, b));
    CHECK(d == ks_statistic(b, a));
    std::vector<double> ea = a;
    std::vector<double> eb = b;
    for (double& v : ea) v = std::exp(v);
    for (double& v : eb) v = std::exp(v);
    CHECK(ks_statistic(ea, eb) == d);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}

namespace {

CellInstance inst(std::string id, Polygon nucleus, std::optional<Polygon> cell) {
  return CellInstance{std::move(id), "p", std::move(nucleus), std::move(cell), std::nullopt, Source::Gold};
}

morph::FeatureRecord rec(double base) {
  morph::FeatureRecord r;
  for (std::size_t f = 0; f < r.values.size(); ++f) r.values[f] = base + static_cast<double>(f);
  return r;
}

}  // namespace

TEST_CASE("report with predictions equal to gold") {
  const std::vector<CellInstance> gold{
      inst("a", make_rectangle(5, 5, 6, 6), make_rectangle(2, 2, 12, 12)),
      inst("b", make_rectangle(30, 30, 5, 5), std::nullopt),
      inst("c", make_rectangle(40, 5, 6, 6), make_rectangle(38, 3, 10, 10)),
  };
  const std::vector<Polygon> orphan{make_rectangle(5, 40, 10, 10)};
  std::vector<CellInstance> pred = gold;
  pred.push_back(inst("o", make_rectangle(7, 42, 5, 5), orphan[0]));
  const std::vector<PatchEval> patches{make_patch_eval("p", 64, 64, pred, gold, orphan)};
  const std::vector<morph::FeatureRecord> feats{rec(1), rec(2), rec(3)};
  const EvalReport r = build_report(patches, feats, feats);
  CHECK(r.ap50_cell == doctest::Approx(100.0));
  CHECK(r.ap75_cell == doctest::Approx(100.0));
  CHECK(r.num_gold_cells == 3);
  CHECK(r.num_gold_nuclei == 3);
  // The extra predicted nucleus is a false positive at the lowest rank.
  CHECK(r.ap50_nucleus == doctest::Approx(100.0));
  REQUIRE(r.ks);
  for (double d : *r.ks) CHECK(d == 0.0);
  CHECK(*r.mean_d == 0.0);

  std::vector<morph::FeatureRecord> shuffled{rec(3), rec(1), rec(2)};
  const std::vector<morph::FeatureRecord> other{rec(1.5), rec(2), rec(9)};
  CHECK(*build_report(patches, other, feats).ks == *build_report(patches, other, shuffled).ks);

  const EvalReport no_ks = build_report(patches, {}, feats);
  CHECK_FALSE(no_ks.ks);
  CHECK(report_to_json(no_ks, "m").find("\"ks\": null") != std::string::npos);
}

TEST_CASE("report formatting carries the reference rows") {
  EvalReport r;
  r.ap50_nucleus = 40.0;
  const std::string text = report_to_text(r, "watershed");
  CHECK(text.find("58.65") != std::string::npos);
  CHECK(text.find("70.36") != std::string::npos);
  CHECK(text.find("watershed (this run)") != std::string::npos);
  CHECK(reference_rows().size() == 5);
  const std::string json = report_to_json(r, "watershed");
  CHECK(json.find("58.65") == std::string::npos);
}

TEST_CASE("report json round trip and multi-run text") {
  EvalReport a;
  a.ap50_nucleus = 12.5;
  a.ap75_cell = 0.1 + 0.2;
  a.num_gold_cells = 7;
  EvalReport b = a;
  std::array<double, morph::kFeatureCount> ks{};
  for (std::size_t f = 0; f < ks.size(); ++f) ks[f] = 1.0 / static_cast<double>(f + 3);
  b.ks = ks;
  b.mean_d = 0.123456789;
  for (const EvalReport& r : {a, b}) {
    const NamedReport back = report_from_json(report_to_json(r, "m1"));
    CHECK(back.model == "m1");
    CHECK(back.report.ap50_nucleus == r.ap50_nucleus);
    CHECK(back.report.ap75_cell == r.ap75_cell);
    CHECK(back.report.num_gold_cells == r.num_gold_cells);
    CHECK(back.report.ks == r.ks);
    CHECK(back.report.mean_d == r.mean_d);
  }
  CHECK_THROWS_AS(report_from_json("{}"), ParseError);

  const std::vector<NamedReport> runs{{"first", a}, {"second", b}};
  const std::string text = report_to_text(runs);
  CHECK(text.find("first (this run)") < text.find("second (this run)"));
  CHECK(text.find(" \n") == std::string::npos);
}
