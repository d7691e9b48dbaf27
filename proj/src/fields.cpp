#include "pixbrush/fields.hpp"

#include <cmath>
#include <stdexcept>

#include "pixbrush/rng.hpp"

namespace pixbrush {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

size_t FieldParams::block_w_offset(int block) const {
  size_t off = 0;
  for (int k = 0; k < block; ++k) {
    off += static_cast<size_t>(width) * in_dim(k) + 3 * static_cast<size_t>(width);
  }
  return off;
}

Eigen::MatrixXd fourier_encode(const std::vector<Vec3>& points, const EncodingSpec& spec) {
  if (spec.num_frequencies < 1) throw std::runtime_error("fourier_encode: zero frequencies requested");
  const int n = static_cast<int>(points.size());
  const int dim = spec.output_dim();
  MatrixXd out(n, dim);

  if (spec.mode == EncodingMode::AxisAligned) {
    const int f = spec.num_frequencies;
    for (int r = 0; r < n; ++r) {
      const double coords[3] = {points[r].x, points[r].y, points[r].z};
      for (int k = 0; k < f; ++k) {
        double freq = spec.frequency_scale * std::pow(2.0, k);
        for (int d = 0; d < 3; ++d) {
          double phase = 2.0 * M_PI * freq * coords[d];
          out(r, k * 3 + d) = std::sin(phase);
          out(r, f * 3 + k * 3 + d) = std::cos(phase);
        }
      }
    }
  } else {
    const int f = spec.num_frequencies;
    MatrixXd freq(f, 3);
    Rng rng(spec.seed);
    for (int k = 0; k < f; ++k) {
      for (int d = 0; d < 3; ++d) freq(k, d) = spec.frequency_scale * rng.normal();
    }
    for (int r = 0; r < n; ++r) {
      for (int k = 0; k < f; ++k) {
        double proj = freq(k, 0) * points[r].x + freq(k, 1) * points[r].y + freq(k, 2) * points[r].z;
        double phase = 2.0 * M_PI * proj;
        out(r, k) = std::sin(phase);
        out(r, f + k) = std::cos(phase);
      }
    }
  }
  return out;
}

FieldParams init_field_params(const EncodingSpec& spec, HeadKind head_kind, uint64_t seed,
                              int width) {
  if (width < 1) throw std::runtime_error("init_field_params: width must be >= 1");
  FieldParams p;
  p.encoding = spec;
  p.head_kind = head_kind;
  p.width = width;
  p.params.assign(p.param_count(), 0.0);
  p.running_mean.assign(static_cast<size_t>(FieldParams::kNumBlocks) * width, 0.0);
  p.running_var.assign(static_cast<size_t>(FieldParams::kNumBlocks) * width, 1.0);

  Rng rng(seed);
  for (int k = 0; k < FieldParams::kNumBlocks; ++k) {
    const int in = p.in_dim(k);
    double sigma = std::sqrt(2.0 / in);
    double* w = p.params.data() + p.block_w_offset(k);
    for (size_t t = 0; t < static_cast<size_t>(width) * in; ++t) w[t] = sigma * rng.normal();
    double* gamma = p.params.data() + p.block_gamma_offset(k);
    for (int t = 0; t < width; ++t) gamma[t] = 1.0;
    // b and beta stay 0
  }
  double* hw = p.params.data() + p.head_w_offset();
  for (size_t t = 0; t < static_cast<size_t>(p.out_dim()) * width; ++t) hw[t] = 0.01 * rng.normal();
  return p;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

FieldForward field_forward(const FieldParams& p, const std::vector<Vec3>& points, NormMode mode) {
  const int n = static_cast<int>(points.size());
  const int w = p.width;
  FieldForward fwd;
  fwd.mode = mode;
  fwd.encoded = fourier_encode(points, p.encoding);
  fwd.pre_norm.resize(FieldParams::kNumBlocks);
  fwd.normalized.resize(FieldParams::kNumBlocks);
  fwd.activation.resize(FieldParams::kNumBlocks);
  fwd.batch_mean.resize(FieldParams::kNumBlocks);
  fwd.batch_var.resize(FieldParams::kNumBlocks);

  const MatrixXd* prev = &fwd.encoded;
  for (int k = 0; k < FieldParams::kNumBlocks; ++k) {
    const int in = p.in_dim(k);
    RowMajorMap W(p.params.data() + p.block_w_offset(k), w, in);
    Eigen::Map<const VectorXd> b(p.params.data() + p.block_b_offset(k), w);
    Eigen::Map<const VectorXd> gamma(p.params.data() + p.block_gamma_offset(k), w);
    Eigen::Map<const VectorXd> beta(p.params.data() + p.block_beta_offset(k), w);

    MatrixXd z = (*prev) * W.transpose();
    z.rowwise() += b.transpose();
    fwd.pre_norm[k] = z;

    VectorXd mu, var;
    if (mode == NormMode::Batch) {
      mu = z.colwise().mean();
      MatrixXd centered = z.rowwise() - mu.transpose();
      var = centered.array().square().colwise().mean();  // biased
    } else {
      mu = Eigen::Map<const VectorXd>(p.running_mean.data() + static_cast<size_t>(k) * w, w);
      var = Eigen::Map<const VectorXd>(p.running_var.data() + static_cast<size_t>(k) * w, w);
    }
    fwd.batch_mean[k] = mu;
    fwd.batch_var[k] = var;

    VectorXd inv_std = (var.array() + FieldParams::kBnEps).rsqrt();
    MatrixXd zh = (z.rowwise() - mu.transpose()).array().rowwise() * inv_std.transpose().array();
    fwd.normalized[k] = zh;

    MatrixXd y = zh.array().rowwise() * gamma.transpose().array();
    y.rowwise() += beta.transpose();
    fwd.activation[k] = y.cwiseMax(0.0);
    prev = &fwd.activation[k];
  }

  RowMajorMap Wh(p.params.data() + p.head_w_offset(), p.out_dim(), w);
  Eigen::Map<const VectorXd> bh(p.params.data() + p.head_b_offset(), p.out_dim());
  fwd.pre_head = (*prev) * Wh.transpose();
  fwd.pre_head.rowwise() += bh.transpose();
  fwd.output = fwd.pre_head.unaryExpr([](double x) { return sigmoid(x); });
  (void)n;
  return fwd;
}

std::vector<double> field_backward(const FieldParams& p, const FieldForward& fwd,
                                   const Eigen::MatrixXd& d_output) {
  const int w = p.width;
  const int n = static_cast<int>(fwd.output.rows());
  std::vector<double> grad(p.param_count(), 0.0);

  // Head: sigmoid then linear.
  MatrixXd d_pre = d_output.cwiseProduct(
      fwd.output.cwiseProduct(MatrixXd::Constant(n, p.out_dim(), 1.0) - fwd.output));
  const MatrixXd& last_act = fwd.activation[FieldParams::kNumBlocks - 1];
  {
    RowMajorMutMap dWh(grad.data() + p.head_w_offset(), p.out_dim(), w);
    dWh = d_pre.transpose() * last_act;
    Eigen::Map<VectorXd> dbh(grad.data() + p.head_b_offset(), p.out_dim());
    dbh = d_pre.colwise().sum();
  }
  RowMajorMap Wh(p.params.data() + p.head_w_offset(), p.out_dim(), w);
  MatrixXd d_act = d_pre * Wh;  // gradient flowing into the last activation

  for (int k = FieldParams::kNumBlocks - 1; k >= 0; --k) {
    const int in = p.in_dim(k);
    Eigen::Map<const VectorXd> gamma(p.params.data() + p.block_gamma_offset(k), w);

    // ReLU
    MatrixXd dy = (fwd.activation[k].array() > 0.0).cast<double>() * d_act.array();

    // Batch norm
    Eigen::Map<VectorXd> dgamma(grad.data() + p.block_gamma_offset(k), w);
    Eigen::Map<VectorXd> dbeta(grad.data() + p.block_beta_offset(k), w);
    dgamma = dy.cwiseProduct(fwd.normalized[k]).colwise().sum();
    dbeta = dy.colwise().sum();

    MatrixXd dzh = dy.array().rowwise() * gamma.transpose().array();
    VectorXd inv_std = (fwd.batch_var[k].array() + FieldParams::kBnEps).rsqrt();
    MatrixXd dz;
    if (fwd.mode == NormMode::Batch) {
      MatrixXd centered = fwd.pre_norm[k].rowwise() - fwd.batch_mean[k].transpose();
      VectorXd dvar = -0.5 * (dzh.cwiseProduct(centered).colwise().sum().transpose().array() *
                              inv_std.array().cube());
      VectorXd dmu = -(dzh.colwise().sum().transpose().array() * inv_std.array());
      dz = dzh.array().rowwise() * inv_std.transpose().array();
      dz.array() += centered.array().rowwise() * (2.0 / n * dvar.transpose().array());
      dz.array().rowwise() += (dmu.transpose().array() / n);
    } else {
      dz = dzh.array().rowwise() * inv_std.transpose().array();
    }

    // Linear
    const MatrixXd& input = k == 0 ? fwd.encoded : fwd.activation[k - 1];
    RowMajorMutMap dW(grad.data() + p.block_w_offset(k), w, in);
    dW = dz.transpose() * input;
    Eigen::Map<VectorXd> db(grad.data() + p.block_b_offset(k), w);
    db = dz.colwise().sum();

    if (k > 0) {
      RowMajorMap W(p.params.data() + p.block_w_offset(k), w, in);
      d_act = dz * W;
    }
  }
  return grad;
}

void update_running_stats(FieldParams& p, const FieldForward& fwd, double momentum) {
  if (fwd.mode != NormMode::Batch) return;
  const int w = p.width;
  for (int k = 0; k < FieldParams::kNumBlocks; ++k) {
    for (int t = 0; t < w; ++t) {
      double& m = p.running_mean[static_cast<size_t>(k) * w + t];
      double& v = p.running_var[static_cast<size_t>(k) * w + t];
      m = (1.0 - momentum) * m + momentum * fwd.batch_mean[k](t);
      v = (1.0 - momentum) * v + momentum * fwd.batch_var[k](t);
    }
  }
}

std::vector<double> eval_localization(const FieldParams& p, const std::vector<Vec3>& points) {
  if (p.head_kind != HeadKind::Probability) {
    throw std::runtime_error("eval_localization: params have no probability head");
  }
  FieldForward fwd = field_forward(p, points, NormMode::Running);
  std::vector<double> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) out[i] = fwd.output(static_cast<int>(i), 0);
  return out;
}

std::vector<std::array<double, 3>> eval_texture(const FieldParams& p,
                                                const std::vector<Vec3>& points) {
  if (p.head_kind != HeadKind::Rgb) {
    throw std::runtime_error("eval_texture: params have no rgb head");
  }
  FieldForward fwd = field_forward(p, points, NormMode::Running);
  std::vector<std::array<double, 3>> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    for (int c = 0; c < 3; ++c) out[i][c] = fwd.output(static_cast<int>(i), c);
  }
  return out;
}

TextureMaps extract_maps(const FieldParams& loc_params, const FieldParams& tex_params,
                         const SurfaceSampleSet& samples) {
  if (samples.samples.empty()) throw std::runtime_error("extract_maps: empty sample set");
  const int R = samples.resolution;
  std::vector<Vec3> points;
  points.reserve(samples.samples.size());
  for (const SurfaceSample& s : samples.samples) points.push_back(s.point);

  std::vector<double> probs = eval_localization(loc_params, points);
  std::vector<std::array<double, 3>> colors = eval_texture(tex_params, points);

  TextureMaps maps;
  maps.probability = Image(R, R, 1, 0.0);
  maps.rgb = Image(R, R, 3, 0.0);
  for (size_t s = 0; s < samples.samples.size(); ++s) {
    const SurfaceSample& smp = samples.samples[s];
    maps.probability.at(smp.j, smp.i, 0) = probs[s];
    for (int c = 0; c < 3; ++c) maps.rgb.at(smp.j, smp.i, c) = colors[s][c];
  }
  return maps;
}

}  // namespace pixbrush
