#include "rica/imagedemix.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rica/ranks.hpp"

namespace rica {

void GrayImage::validate() const {
  if (width < 1 || height < 1 || pixels.rows() != height || pixels.cols() != width) {
    throw DimensionMismatch("GrayImage: inconsistent dimensions");
  }
  if (!pixels.allFinite() || pixels.minCoeff() < 0.0 || pixels.maxCoeff() > 1.0) {
    throw InvalidParams("GrayImage: pixels must lie in [0,1]");
  }
}

namespace {

// reads one header token, skipping whitespace and '#' comments
std::string pgm_token(std::istream& is) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok += static_cast<char>(c);
  }
  if (tok.empty()) throw IoError("pgm: truncated header");
  return tok;
}

GrayImage rescale_for_display(const Eigen::VectorXd& channel, int width, int height) {
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(height, width);
  const double lo = channel.minCoeff(), hi = channel.maxCoeff();
  const double span = hi - lo;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double v = channel(static_cast<Eigen::Index>(r) * width + c);
      img.pixels(r, c) = span > 1e-12 ? (v - lo) / span : 0.5;
    }
  }
  return img;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image '" + path + "'");
  const std::string magic = pgm_token(f);
  if (magic != "P2" && magic != "P5") throw IoError("pgm: expected P2 or P5 in '" + path + "'");
  GrayImage img;
  try {
    img.width = std::stoi(pgm_token(f));
    img.height = std::stoi(pgm_token(f));
  } catch (const std::exception&) {
    throw IoError("pgm: bad dimensions in '" + path + "'");
  }
  const int maxval = std::stoi(pgm_token(f));
  if (maxval < 1 || maxval > 255) throw IoError("pgm: only 8-bit depth supported");
  if (img.width < 1 || img.height < 1) throw IoError("pgm: bad dimensions");
  img.pixels.resize(img.height, img.width);

  if (magic == "P5") {
    // single whitespace byte after maxval, then the raster
    std::vector<unsigned char> raw(static_cast<std::size_t>(img.width) * img.height);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (f.gcount() != static_cast<std::streamsize>(raw.size())) throw IoError("pgm: truncated raster");
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c)
        img.pixels(r, c) = raw[static_cast<std::size_t>(r) * img.width + c] / static_cast<double>(maxval);
  } else {
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        const int v = std::stoi(pgm_token(f));
        if (v < 0 || v > maxval) throw IoError("pgm: sample out of range");
        img.pixels(r, c) = v / static_cast<double>(maxval);
      }
    }
  }
  img.validate();
  return img;
}

void write_pgm(const GrayImage& img, const std::string& path, bool binary) {
  img.validate();
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw IoError("cannot write image '" + path + "'");
  f << (binary ? "P5" : "P2") << "\n" << img.width << " " << img.height << "\n255\n";
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const int v = static_cast<int>(std::lround(img.pixels(r, c) * 255.0));
      const int clamped = std::clamp(v, 0, 255);
      if (binary) {
        f.put(static_cast<char>(static_cast<unsigned char>(clamped)));
      } else {
        f << clamped << (c + 1 == img.width ? "\n" : " ");
      }
    }
  }
  if (!f) throw IoError("write failed for '" + path + "'");
}

Eigen::MatrixXd image_mixing(int k) {
  return Eigen::MatrixXd::Identity(k, k) + 0.95 * (Eigen::MatrixXd::Ones(k, k) - Eigen::MatrixXd::Identity(k, k));
}

MixedImages mix_images(const std::vector<GrayImage>& sources, const Eigen::MatrixXd& l) {
  const int k = static_cast<int>(sources.size());
  if (k < 2) throw DimensionMismatch("mix_images: need at least two sources");
  if (l.rows() != k || l.cols() != k) throw DimensionMismatch("mix_images: mixing matrix size");
  for (const auto& s : sources) s.validate();
  const int w = sources[0].width, h = sources[0].height;
  for (const auto& s : sources) {
    if (s.width != w || s.height != h) throw DimensionMismatch("mix_images: source sizes differ");
  }

  const Eigen::Index n = static_cast<Eigen::Index>(w) * h;
  Eigen::MatrixXd z(n, k);
  for (int j = 0; j < k; ++j)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        z(static_cast<Eigen::Index>(r) * w + c, j) = sources[static_cast<std::size_t>(j)].pixels(r, c);

  MixedImages out;
  out.sample = z * l.transpose();
  out.images.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) out.images.push_back(rescale_for_display(out.sample.col(j), w, h));
  return out;
}

DemixResult demix_images(const Eigen::MatrixXd& sample, int width, int height,
                         const EstimatorSpec& prelim, int steps, const RunKnobs& knobs,
                         const Eigen::MatrixXd* truth) {
  const int k = static_cast<int>(sample.cols());
  if (k < 2) throw DimensionMismatch("demix_images: need k >= 2 channels");
  if (sample.rows() != static_cast<Eigen::Index>(width) * height) {
    throw DimensionMismatch("demix_images: sample rows must equal width*height");
  }
  if (sample.rows() < 1000) throw InvalidParams("demix_images: need at least 1000 pixels");

  const EstimatorOutcome pre = run_estimator(prelim, sample, knobs);
  const MixingMatrix pre_m = MixingMatrix::from_canonical(pre.estimate);

  DemixResult out;
  out.flags = pre.flags;
  out.tie_fraction = component_ranks(residuals(sample, Eigen::VectorXd(), pre_m)).tie_fraction();

  REstimatorOptions opt;
  opt.steps = steps;
  opt.c = knobs.c;
  opt.lambda_max = knobs.lambda_max;
  const REstimatorResult res = data_driven_r_estimator(sample, pre_m, opt, truth);

  out.estimates = res.path;
  out.ae_trace = res.ae_trace;
  const std::string rflags = res.flags();
  if (!rflags.empty()) out.flags += (out.flags.empty() ? "" : ";") + rflags;

  for (const auto& est : out.estimates) {
    const Eigen::MatrixXd z = residuals(sample, Eigen::VectorXd(), est);
    std::vector<GrayImage> channels;
    channels.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) channels.push_back(rescale_for_display(z.col(j), width, height));
    out.demixed.push_back(std::move(channels));
  }
  return out;
}

}  // namespace rica
