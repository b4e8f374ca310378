#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cytobench/error.hpp"
#include "cytobench/reference.hpp"
#include "cytobench/stain.hpp"

using namespace cytobench;
using namespace cytobench::stain;

namespace {

double angle_deg(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  return std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

// Forward model written independently of compose().
Rgb forward(const std::array<double, 3>& h, const std::array<double, 3>& e, double ch, double ce) {
  Rgb out{};
  for (std::size_t k = 0; k < 3; ++k) {
    const double od = h[k] * ch + e[k] * ce;
    const double v = 256.0 * std::pow(10.0, -od) - 1.0;
    out[k] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

std::array<double, 3> unit(std::array<double, 3> v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  for (double& x : v) x /= n;
  return v;
}

ImagePatch synthetic_patch(std::mt19937_64& rng, const std::array<double, 3>& h, const std::array<double, 3>& e,
                           int size) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> px;
  for (int i = 0; i < size * size; ++i) {
    const double pick = u(rng);
    double ch = 0.2 + 1.0 * u(rng);
    double ce = 0.2 + 0.8 * u(rng);
    if (pick < 0.15) ce = 0.0;
    else if (pick < 0.30) ch = 0.0;
    else if (pick < 0.40) ch = ce = 0.0;
    const Rgb c = forward(h, e, ch, ce);
    px.insert(px.end(), c.begin(), c.end());
  }
  return ImagePatch(size, size, std::move(px), 0.5);
}

}  // namespace

TEST_CASE("optical density conversion") {
  CHECK(intensity_to_od(255) == 0.0);
  CHECK(intensity_to_od(0) == doctest::Approx(-std::log10(1.0 / 256.0)));
  CHECK(intensity_to_od(0) == doctest::Approx(2.408).epsilon(1e-3));
  const ImagePatch uniform(5, 4, Rgb{120, 30, 200}, 0.5);
  const OdImage od = rgb_to_od(uniform);
  for (std::size_t i = 0; i < od.pixel_count(); ++i) CHECK(od.at(i) == od.at(0));
  CHECK(od.od == reference::rgb_to_od(uniform).od);
  CHECK_THROWS_AS(rgb_to_od(uniform, 0), InvalidArgument);
  for (int i = 0; i < 256; ++i) CHECK(od_to_intensity(intensity_to_od(i)) == i);
}

TEST_CASE("reference profile is valid") {
  const StainProfile p = reference_profile();
  CHECK_NOTHROW(p.validate());
  CHECK(angle_deg(p.hematoxylin, {0.65, 0.70, 0.29}) < 1e-9);
  CHECK(p.max_concentrations == std::array<double, 2>{1.9705, 1.0308});
  StainProfile bad = p;
  bad.eosin[0] = -0.1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("white patch has no tissue") {
  const ImagePatch white(32, 32, Rgb{255, 255, 255}, 0.5);
  CHECK_THROWS_AS(estimate_stain_matrix(white), NoTissueError);
}

TEST_CASE("macenko recovers planted stain vectors on 50 patches") {
  std::mt19937_64 rng(1234);
  std::normal_distribution<double> jitter(0.0, 0.08);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = unit({std::max(0.05, 0.65 + jitter(rng)), std::max(0.05, 0.70 + jitter(rng)),
                         std::max(0.05, 0.29 + jitter(rng))});
    const auto e = unit({std::max(0.02, 0.07 + jitter(rng)), std::max(0.05, 0.99 + jitter(rng)),
                         std::max(0.02, 0.11 + jitter(rng))});
    const StainProfile est = estimate_stain_matrix(synthetic_patch(rng, h, e, 64));
    CHECK_NOTHROW(est.validate());
    worst = std::max({worst, angle_deg(est.hematoxylin, h), angle_deg(est.eosin, e)});
  }
  MESSAGE("worst angular error " << worst << " deg");
  CHECK(worst < 2.0);
}

TEST_CASE("macenko is stable under permutation and duplication") {
  std::mt19937_64 rng(42);
  const auto h = unit({0.65, 0.70, 0.29});
  const auto e = unit({0.07, 0.99, 0.11});
  const ImagePatch patch = synthetic_patch(rng, h, e, 40);
  const StainProfile base = estimate_stain_matrix(patch);

  std::vector<std::uint8_t> px(patch.pixels().begin(), patch.pixels().end());
  std::vector<std::size_t> order(patch.pixel_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::uint8_t> shuffled;
  for (std::size_t i : order) shuffled.insert(shuffled.end(), px.begin() + 3 * i, px.begin() + 3 * i + 3);
  CHECK(estimate_stain_matrix(ImagePatch(40, 40, shuffled, 0.5)) == base);

  std::vector<std::uint8_t> doubled = px;
  doubled.insert(doubled.end(), px.begin(), px.end());
  CHECK(estimate_stain_matrix(ImagePatch(40, 80, doubled, 0.5)) == base);
}

TEST_CASE("deconvolution inverts the forward model") {
  const StainProfile p = reference_profile();
  SUBCASE("pure hematoxylin at 0.8") {
    const ImagePatch px(1, 1, forward(p.hematoxylin, p.eosin, 0.8, 0.0), 0.5);
    const ConcentrationMap c = deconvolve(px, p);
    CHECK(std::abs(c.h[0] - 0.8) <= 0.02);
    CHECK(std::abs(c.e[0]) <= 0.02);
  }
  SUBCASE("white pixel") {
    const ConcentrationMap c = deconvolve(ImagePatch(1, 1, Rgb{255, 255, 255}, 0.5), p);
    CHECK(c.h[0] == 0.0);
    CHECK(c.e[0] == 0.0);
  }
  SUBCASE("20x20 grid of concentrations in [0, 1.5]") {
    std::vector<std::uint8_t> px;
    std::vector<std::pair<double, double>> truth;
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < 20; ++j) {
        const double a = 1.5 * i / 19.0;
        const double b = 1.5 * j / 19.0;
        const Rgb c = forward(p.hematoxylin, p.eosin, a, b);
        px.insert(px.end(), c.begin(), c.end());
        truth.emplace_back(a, b);
      }
    }
    const ImagePatch patch(20, 20, px, 0.5);
    const ConcentrationMap c = deconvolve(patch, p);
    const ConcentrationMap r = reference::deconvolve(patch, p);
    // Propagated 8-bit quantization bound: half a level of OD error per
    // channel pushed through the absolute pseudo-inverse rows.
    double hh = 0, he = 0, ee = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      hh += p.hematoxylin[k] * p.hematoxylin[k];
      he += p.hematoxylin[k] * p.eosin[k];
      ee += p.eosin[k] * p.eosin[k];
    }
    const double det = hh * ee - he * he;
    double worst_away = 0.0;
    int away = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const Rgb rgb = patch.at(static_cast<int>(k % 20), static_cast<int>(k / 20));
      double bound_h = 0, bound_e = 0;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double i = rgb[ch];
        const double lo = (i == 0) ? 256.0 * std::pow(10.0, -(p.hematoxylin[ch] * truth[k].first +
                                                              p.eosin[ch] * truth[k].second)) - 1.0
                                   : i - 0.5;
        const double q = std::max(std::abs(std::log10((i + 1.0) / (std::max(lo, -0.999) + 1.0))),
                                  std::abs(std::log10((i + 1.5) / (i + 1.0))));
        bound_h += std::abs((ee * p.hematoxylin[ch] - he * p.eosin[ch]) / det) * q;
        bound_e += std::abs((hh * p.eosin[ch] - he * p.hematoxylin[ch]) / det) * q;
      }
      const double dh = std::abs(c.h[k] - truth[k].first);
      const double de = std::abs(c.e[k] - truth[k].second);
      CHECK(dh <= bound_h + 1e-12);
      CHECK(de <= bound_e + 1e-12);
      if (std::min({rgb[0], rgb[1], rgb[2]}) >= 16) {
        ++away;
        worst_away = std::max({worst_away, dh, de});
      }
      CHECK(c.h[k] == doctest::Approx(r.h[k]).epsilon(1e-12));
      CHECK(c.e[k] == doctest::Approx(r.e[k]).epsilon(1e-12));
    }
    MESSAGE(away << " grid points away from the 8-bit floor, worst error " << worst_away);
    CHECK(away >= 150);
    CHECK(worst_away <= 0.02);
  }
  SUBCASE("compose agrees with the independent forward model") {
    for (double a : {0.0, 0.3, 1.1}) {
      for (double b : {0.0, 0.5, 0.9}) CHECK(compose(p, a, b) == forward(p.hematoxylin, p.eosin, a, b));
    }
  }
  SUBCASE("collinear stain vectors") {
    StainProfile bad = p;
    bad.eosin = bad.hematoxylin;
    CHECK_THROWS_AS(deconvolve(ImagePatch(1, 1, Rgb{100, 100, 100}, 0.5), bad), InvalidArgument);
  }
  SUBCASE("clamping is opt-in") {
    const ImagePatch px(1, 1, Rgb{250, 120, 250}, 0.5);
    const ConcentrationMap raw = deconvolve(px, p);
    const ConcentrationMap clamped = deconvolve(px, p, 255, true);
    CHECK(std::min(raw.h[0], raw.e[0]) < 0.0);
    CHECK(std::min(clamped.h[0], clamped.e[0]) == 0.0);
  }
}

TEST_CASE("normalization") {
  std::mt19937_64 rng(8);
  const StainProfile ref = reference_profile();
  const ImagePatch patch = synthetic_patch(rng, ref.hematoxylin, ref.eosin, 32);

  SUBCASE("identity when source equals reference") {
    const ImagePatch out = normalize(patch, ref, ref);
    for (std::size_t i = 0; i < patch.pixels().size(); ++i) {
      CHECK(std::abs(int(out.pixels()[i]) - int(patch.pixels()[i])) <= 1);
    }
  }
  SUBCASE("near idempotent and white stays white") {
    const auto h = unit({0.55, 0.80, 0.25});
    const auto e = unit({0.12, 0.95, 0.20});
    std::vector<std::uint8_t> px;
    for (int i = 0; i < 32 * 32; ++i) {
      const Rgb c = (i % 7 == 0) ? Rgb{255, 255, 255} : forward(h, e, 0.1 + (i % 13) * 0.08, 0.05 + (i % 11) * 0.07);
      px.insert(px.end(), c.begin(), c.end());
    }
    const ImagePatch src(32, 32, px, 0.5);
    const ImagePatch once = normalize(src, estimate_stain_matrix(src), ref);
    const ImagePatch twice = normalize(once, estimate_stain_matrix(once), ref);
    int worst = 0;
    for (std::size_t i = 0; i < px.size(); ++i) worst = std::max(worst, std::abs(int(once.pixels()[i]) - int(twice.pixels()[i])));
    MESSAGE("normalize twice vs once: " << worst << " levels");
    CHECK(worst <= 2);
    for (int i = 0; i < 32 * 32; i += 7) {
      const Rgb c = once.at(i % 32, i / 32);
      for (auto ch : c) CHECK(ch >= 254);
    }
    CHECK(once.width() == src.width());
    CHECK(once.height() == src.height());
  }
}

TEST_CASE("profile json round-trip") {
  const StainProfile p = make_profile({0.6, 0.7, 0.3}, {0.1, 0.9, 0.2}, {1.5, 0.8});
  CHECK(profile_from_json(profile_to_json(p)) == p);
  CHECK_THROWS(profile_from_json("{\"hematoxylin\": 3}"));
}
