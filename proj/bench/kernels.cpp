// Parallel kernels against their serial references on one 512x512 patch.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "cytobench/expansion.hpp"
#include "cytobench/filters.hpp"
#include "cytobench/reference.hpp"
#include "cytobench/stain.hpp"

using namespace cytobench;

namespace {

constexpr int kSide = 512;

const std::vector<double>& noise() {
  static const std::vector<double> img = [] {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(kSide) * kSide);
    for (double& x : v) x = u(rng);
    return v;
  }();
  return img;
}

const ImagePatch& patch() {
  static const ImagePatch p = [] {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> u(40, 255);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(kSide) * kSide * 3);
    for (auto& b : px) b = static_cast<std::uint8_t>(u(rng));
    return ImagePatch(kSide, kSide, std::move(px), 0.5);
  }();
  return p;
}

const Polygon& blob() {
  static const Polygon poly = [] {
    std::vector<Point> pts;
    for (int k = 0; k < 400; ++k) {
      const double t = 2.0 * M_PI * k / 400.0;
      const double r = 200.0 + 30.0 * std::sin(7.0 * t);
      pts.push_back({256.0 + r * std::cos(t), 256.0 + r * std::sin(t)});
    }
    return Polygon(pts);
  }();
  return poly;
}

const std::vector<Mask>& nuclei() {
  static const std::vector<Mask> masks = [] {
    std::vector<Mask> out;
    for (int gy = 0; gy < 4; ++gy) {
      for (int gx = 0; gx < 4; ++gx) {
        const Point c{16.0 + 32.0 * gx, 16.0 + 32.0 * gy};
        out.push_back(rasterize(make_regular_polygon(c, 5.0, 16), 128, 128));
      }
    }
    return out;
  }();
  return masks;
}

void BM_rasterize(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(rasterize(blob(), kSide, kSide));
}
void BM_rasterize_reference(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(reference::rasterize(blob(), kSide, kSide));
}

void BM_rgb_to_od(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(stain::rgb_to_od(patch()));
}
void BM_rgb_to_od_reference(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(reference::rgb_to_od(patch()));
}

void BM_deconvolve(benchmark::State& s) {
  const auto profile = stain::reference_profile();
  for (auto _ : s) benchmark::DoNotOptimize(stain::deconvolve(patch(), profile));
}
void BM_deconvolve_reference(benchmark::State& s) {
  const auto profile = stain::reference_profile();
  for (auto _ : s) benchmark::DoNotOptimize(reference::deconvolve(patch(), profile));
}

void BM_disk_erode(benchmark::State& s) {
  const double r = static_cast<double>(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(disk_erode(noise(), kSide, kSide, r));
}
void BM_disk_erode_reference(benchmark::State& s) {
  const double r = static_cast<double>(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(reference::disk_erode(noise(), kSide, kSide, r));
}

void BM_disk_dilate(benchmark::State& s) {
  const double r = static_cast<double>(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(disk_dilate(noise(), kSide, kSide, r));
}
void BM_disk_dilate_reference(benchmark::State& s) {
  const double r = static_cast<double>(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(reference::disk_dilate(noise(), kSide, kSide, r));
}

void BM_gaussian_blur(benchmark::State& s) {
  const double sigma = static_cast<double>(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(gaussian_blur(noise(), kSide, kSide, sigma));
}
void BM_gaussian_blur_reference(benchmark::State& s) {
  const double sigma = static_cast<double>(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(reference::gaussian_blur(noise(), kSide, kSide, sigma));
}

void BM_assign_nearest(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(expansion::assign_nearest(nuclei(), 10.0));
}
void BM_assign_nearest_reference(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(reference::assign_nearest(nuclei(), 10.0));
}

}  // namespace

BENCHMARK(BM_rasterize)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rasterize_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rgb_to_od)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rgb_to_od_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_deconvolve)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_deconvolve_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_disk_erode)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_disk_erode_reference)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_disk_dilate)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_disk_dilate_reference)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gaussian_blur)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gaussian_blur_reference)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assign_nearest)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assign_nearest_reference)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
