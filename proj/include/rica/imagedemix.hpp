#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "rica/estimators.hpp"

namespace rica {

// Grayscale image with pixels in [0,1]; pixels(r, c) is row r from the top.
struct GrayImage {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd pixels;  // height x width

  void validate() const;
};

// Portable graymap I/O, 8-bit depth mapped linearly to [0,1].
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path, bool binary = true);

// The mixing matrix of the image experiment: unit diagonal, 0.95 elsewhere.
Eigen::MatrixXd image_mixing(int k);

struct MixedImages {
  std::vector<GrayImage> images;  // rescaled to [0,1] for display only
  Eigen::MatrixXd sample;         // raw n x k mixed sample, n = h*w
};

// Pixelwise mixing of k same-size sources; sample row index is r*width + c.
MixedImages mix_images(const std::vector<GrayImage>& sources, const Eigen::MatrixXd& l);

struct DemixResult {
  std::vector<Eigen::MatrixXd> estimates;            // steps 0..T
  std::vector<std::vector<GrayImage>> demixed;       // per step, k channels
  std::vector<double> ae_trace;                      // vs. truth, when known
  double tie_fraction = 0.0;                         // in the preliminary residual ranks
  std::string flags;
};

// Preliminary + multistep R-estimation on the pixel sample; demixed channels
// are min-max rescaled per channel for display.
DemixResult demix_images(const Eigen::MatrixXd& sample, int width, int height,
                         const EstimatorSpec& prelim, int steps, const RunKnobs& knobs,
                         const Eigen::MatrixXd* truth = nullptr);

}  // namespace rica
