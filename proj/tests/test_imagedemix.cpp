#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "rica/imagedemix.hpp"
#include "rica/ranks.hpp"
#include "rica/rng.hpp"

using namespace rica;

namespace {

GrayImage synthetic_image(int w, int h, int kind, std::uint64_t seed) {
  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(h, w);
  RngStream rng(seed);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double v = 0.0;
      switch (kind) {
        case 0: v = 0.5 + 0.4 * std::sin(0.21 * c) + 0.1 * (r / double(h)); break;
        case 1: v = ((r / 8 + c / 8) % 2 == 0 ? 0.25 : 0.8) + 0.05 * std::sin(0.4 * r); break;
        default: {
          const double dx = (c - w / 2.0) / w, dy = (r - h / 2.0) / h;
          v = 0.9 * std::exp(-14.0 * (dx * dx + dy * dy)) + 0.2 * rng.uniform();
        }
      }
      // quantize to 8-bit like a file on disk
      img.pixels(r, c) = std::clamp(std::round(v * 255.0) / 255.0, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace

TEST_CASE("pgm round trips") {
  const std::string dir = std::filesystem::temp_directory_path() / "rica_pgm_test";
  std::filesystem::create_directories(dir);
  const GrayImage img = synthetic_image(37, 23, 2, 5);

  for (bool binary : {true, false}) {
    const std::string path = dir + (binary ? "/a.pgm" : "/b.pgm");
    write_pgm(img, path, binary);
    const GrayImage back = read_pgm(path);
    REQUIRE(back.width == 37);
    REQUIRE(back.height == 23);
    CHECK((back.pixels - img.pixels).cwiseAbs().maxCoeff() == 0.0);  // 8-bit grid round trip
  }

  // header comments are skipped
  {
    std::FILE* f = std::fopen((dir + "/c.pgm").c_str(), "wb");
    std::fputs("P2 # magic\n# a comment line\n2 2\n255\n0 128\n255 7\n", f);
    std::fclose(f);
    const GrayImage c = read_pgm(dir + "/c.pgm");
    CHECK(c.pixels(0, 1) == doctest::Approx(128.0 / 255.0));
    CHECK(c.pixels(1, 0) == doctest::Approx(1.0));
  }

  CHECK_THROWS_AS(read_pgm(dir + "/missing.pgm"), IoError);
  {
    std::FILE* f = std::fopen((dir + "/bad.pgm").c_str(), "wb");
    std::fputs("P6\n2 2\n255\n", f);
    std::fclose(f);
    CHECK_THROWS_AS(read_pgm(dir + "/bad.pgm"), IoError);
  }
  {
    std::FILE* f = std::fopen((dir + "/trunc.pgm").c_str(), "wb");
    std::fputs("P5\n4 4\n255\nab", f);
    std::fclose(f);
    CHECK_THROWS_AS(read_pgm(dir + "/trunc.pgm"), IoError);
  }
}

TEST_CASE("image mixing") {
  const std::vector<GrayImage> sources = {synthetic_image(24, 16, 0, 1),
                                          synthetic_image(24, 16, 1, 2),
                                          synthetic_image(24, 16, 2, 3)};

  // identity mixing passes the raw sample through
  const MixedImages ident = mix_images(sources, Eigen::MatrixXd::Identity(3, 3));
  for (int j = 0; j < 3; ++j)
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 24; ++c)
        CHECK(ident.sample(r * 24 + c, j) == sources[j].pixels(r, c));

  // the image-experiment matrix: own pixel plus 0.95 times the others
  const Eigen::MatrixXd lstar = image_mixing(3);
  CHECK(lstar.diagonal().isOnes());
  CHECK(lstar(0, 1) == 0.95);
  const MixedImages mixed = mix_images(sources, lstar);
  for (int idx : {0, 77, 157}) {
    for (int j = 0; j < 3; ++j) {
      double expect = ident.sample(idx, j);
      for (int m = 0; m < 3; ++m)
        if (m != j) expect += 0.95 * ident.sample(idx, m);
      CHECK(mixed.sample(idx, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  // constant sources give the analytic constants
  GrayImage flat1 = sources[0], flat2 = sources[1];
  flat1.pixels.setConstant(0.2);
  flat2.pixels.setConstant(0.6);
  const MixedImages fm = mix_images({flat1, flat2}, image_mixing(2));
  CHECK(fm.sample(0, 0) == doctest::Approx(0.2 + 0.95 * 0.6).epsilon(1e-12));
  CHECK(fm.sample(0, 1) == doctest::Approx(0.6 + 0.95 * 0.2).epsilon(1e-12));

  // dimension mismatch
  CHECK_THROWS_AS(mix_images({sources[0], synthetic_image(10, 16, 1, 4)}, image_mixing(2)),
                  DimensionMismatch);
}

TEST_CASE("demixing pipeline on synthetic images") {
  const int w = 40, h = 32;  // 1280 pixels
  const std::vector<GrayImage> sources = {synthetic_image(w, h, 0, 11),
                                          synthetic_image(w, h, 1, 12),
                                          synthetic_image(w, h, 2, 13)};
  const Eigen::MatrixXd lstar = image_mixing(3);
  const MixedImages mixed = mix_images(sources, lstar);

  RunKnobs knobs;
  const DemixResult res =
      demix_images(mixed.sample, w, h, parse_estimator("fobi"), 2, knobs, &lstar);
  REQUIRE(res.estimates.size() == 3);
  REQUIRE(res.demixed.size() == 3);
  REQUIRE(res.ae_trace.size() == 3);
  for (double ae : res.ae_trace) {
    CHECK(std::isfinite(ae));
    CHECK(ae >= 0.0);
  }
  CHECK(res.tie_fraction > 0.0);  // 8-bit pixel data is full of ties
  for (const auto& step_imgs : res.demixed) {
    REQUIRE(step_imgs.size() == 3);
    for (const auto& img : step_imgs) CHECK_NOTHROW(img.validate());
  }

  // demixing with the exact matrix recovers sources up to the display rescale
  const Eigen::MatrixXd z = residuals(mixed.sample, Eigen::VectorXd(), lstar);
  for (int j = 0; j < 3; ++j) {
    const Eigen::VectorXd src = mix_images(sources, Eigen::MatrixXd::Identity(3, 3)).sample.col(j);
    const Eigen::VectorXd rec = z.col(j);
    CHECK((rec - src).cwiseAbs().maxCoeff() < 1e-10);
  }

  // pixel-order invariance: a common permutation of pixels leaves estimates
  // unchanged up to summation roundoff
  std::mt19937_64 gen(55);
  std::vector<int> perm(static_cast<std::size_t>(w) * h);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  Eigen::MatrixXd shuffled(mixed.sample.rows(), 3);
  for (Eigen::Index i = 0; i < shuffled.rows(); ++i)
    shuffled.row(perm[static_cast<std::size_t>(i)]) = mixed.sample.row(i);
  const DemixResult res2 = demix_images(shuffled, w, h, parse_estimator("fobi"), 2, knobs, &lstar);
  for (std::size_t t = 0; t < res.estimates.size(); ++t) {
    CHECK((res.estimates[t] - res2.estimates[t]).cwiseAbs().maxCoeff() < 1e-9);
  }

  // three identical sources violate the model and fail loudly
  const MixedImages degenerate = mix_images({sources[0], sources[0], sources[0]}, lstar);
  CHECK_THROWS_AS(demix_images(degenerate.sample, w, h, parse_estimator("fobi"), 1, knobs, &lstar),
                  Error);

  // too few pixels refused
  CHECK_THROWS_AS(demix_images(mixed.sample.topRows(900), 30, 30, parse_estimator("fobi"), 1,
                               knobs, &lstar),
                  InvalidParams);
}
