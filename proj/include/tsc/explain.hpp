#pragma once

// Class activation maps for GAP-headed networks, and metric MDS of their GAP
// features, with SVG / CSV exports.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tsc/data.hpp"
#include "tsc/models.hpp"
#include "tsc/tensor.hpp"

namespace tsc::explain {

/// fcn and resnet end in conv -> GAP -> dense -> softmax.
bool gap_headed(models::Architecture a);

/// GAP vector feeding the softmax for every series: [N, C_last].
/// Throws UnsupportedArchitecture for other models.
Tensor gap_features(const models::Network& net, const data::Dataset& data);
Tensor gap_features(const models::Network& net, const Tensor& x);

struct CamOutput {
  std::size_t cls = 0;
  std::vector<double> cam;         // CAM_c(t) = sum_m w_m^c A_m(t)
  std::vector<double> normalized;  // min-max scaled to [0, 1]; all zero when flat
  std::vector<double> logits;      // pre-softmax class scores z
  std::vector<double> weights;     // w^c, one per final-conv channel
  double bias = 0.0;               // bias_c
  Tensor activations;              // A: [T, C_last]
};

/// series: [T, M]. Throws invalid_argument when cls >= K.
CamOutput compute_cam(const models::Network& net, const Tensor& series, std::size_t cls);

/// Pairwise Euclidean distances between rows: [N, N].
Tensor distance_matrix(const Tensor& features);

/// sqrt(sum (d_ij - |x_i - x_j|)^2 / sum d_ij^2) over all ordered pairs.
double stress(const Tensor& distances, const Tensor& points);

/// Double-centred classical scaling, top eigenpairs by power iteration with
/// deflation: [N, dims].
Tensor classical_mds(const Tensor& distances, std::size_t dims = 2);

struct MdsOptions {
  double tolerance = 1e-6;  // relative Stress change
  std::size_t max_iterations = 300;
};

struct MdsEmbedding {
  Tensor points;     // [N, 2]
  Tensor distances;  // [N, N] input
  double stress = 0.0;
  std::size_t iterations = 0;
  std::vector<double> stress_trace;  // initial value first
};

/// Classical-MDS start refined by SMACOF (Guttman transform). A step that
/// would raise Stress ends the iteration without being taken.
MdsEmbedding mds_embed(const Tensor& distances, const MdsOptions& options = {});

/// Fixed blue -> red ramp; 0 is pure blue, 1 pure red.
std::string ramp_color(double v);

/// series [T, M]; each dimension is drawn as a polyline whose segments are
/// coloured by the normalized CAM.
std::string export_cam_svg(const Tensor& series, std::span<const double> normalized);
/// One colour per class, legend included.
std::string export_mds_svg(const MdsEmbedding& embedding, std::span<const std::size_t> labels,
                           const std::vector<std::string>& vocabulary);

/// `t,value`
void write_cam_csv(const CamOutput& cam, std::ostream& out);
/// `x,y,label`
void write_mds_csv(const MdsEmbedding& embedding, std::span<const std::size_t> labels,
                   const std::vector<std::string>& vocabulary, std::ostream& out);

}  // namespace tsc::explain
