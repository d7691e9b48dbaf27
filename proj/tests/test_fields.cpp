#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pixbrush/fields.hpp"
#include "pixbrush/rng.hpp"
#include "pixbrush/uv_inversion.hpp"
#include "test_util.hpp"

using namespace pixbrush;

namespace {

std::vector<Vec3> random_points(Rng& rng, int n) {
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return pts;
}

// Independent re-implementation of the documented gaussian frequency
// sampling: raw mt19937_64 words shifted to [0,1) doubles, Box-Muller with
// cos branch, u1 redrawn while zero. Written against the documentation, not
// the library RNG.
double ref_uniform(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

double ref_normal(std::mt19937_64& eng) {
  double u1 = ref_uniform(eng);
  double u2 = ref_uniform(eng);
  while (u1 <= 0.0) u1 = ref_uniform(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * testutil::kPi * u2);
}

// Sum of c .* output as a function of the flat parameter vector; used for
// finite-difference gradient checks.
double weighted_output_sum(const FieldParams& base, const std::vector<double>& flat,
                           const std::vector<Vec3>& pts, const Eigen::MatrixXd& c,
                           NormMode mode) {
  FieldParams p = base;
  p.params = flat;
  FieldForward fwd = field_forward(p, pts, mode);
  return (c.array() * fwd.output.array()).sum();
}

}  // namespace

TEST_CASE("fourier_encode: origin gives zero sines and unit cosines") {
  EncodingSpec spec;
  spec.num_frequencies = 3;
  Eigen::MatrixXd enc = fourier_encode({Vec3{0, 0, 0}}, spec);
  REQUIRE(enc.cols() == 18);
  for (int c = 0; c < 9; ++c) CHECK(enc(0, c) == 0.0);
  for (int c = 9; c < 18; ++c) CHECK(enc(0, c) == 1.0);
}

TEST_CASE("fourier_encode: axis-aligned dimension is 2*F*3") {
  EncodingSpec spec;
  spec.num_frequencies = 4;
  Eigen::MatrixXd enc = fourier_encode({Vec3{0.2, -0.7, 0.4}}, spec);
  CHECK(enc.cols() == 24);
  CHECK(spec.output_dim() == 24);
}

TEST_CASE("fourier_encode: axis-aligned values match direct trigonometry") {
  EncodingSpec spec;
  spec.num_frequencies = 2;
  spec.frequency_scale = 0.5;
  Vec3 x{0.3, -0.1, 0.5};
  Eigen::MatrixXd enc = fourier_encode({x}, spec);
  const double coords[3] = {x.x, x.y, x.z};
  for (int k = 0; k < 2; ++k) {
    double freq = 0.5 * std::pow(2.0, k);
    for (int d = 0; d < 3; ++d) {
      double phase = 2.0 * testutil::kPi * freq * coords[d];
      CHECK(enc(0, k * 3 + d) == doctest::Approx(std::sin(phase)).epsilon(1e-12));
      CHECK(enc(0, 6 + k * 3 + d) == doctest::Approx(std::cos(phase)).epsilon(1e-12));
    }
  }
}

TEST_CASE("fourier_encode: gaussian mode matches an independent recomputation") {
  EncodingSpec spec;
  spec.mode = EncodingMode::GaussianRandom;
  spec.num_frequencies = 5;
  spec.frequency_scale = 1.5;
  spec.seed = 7;
  Vec3 x{0.3, -0.1, 0.5};
  Eigen::MatrixXd enc = fourier_encode({x}, spec);
  REQUIRE(enc.cols() == 10);

  std::mt19937_64 eng(7);
  for (int k = 0; k < 5; ++k) {
    double w0 = 1.5 * ref_normal(eng);
    double w1 = 1.5 * ref_normal(eng);
    double w2 = 1.5 * ref_normal(eng);
    double phase = 2.0 * testutil::kPi * (w0 * x.x + w1 * x.y + w2 * x.z);
    CHECK(enc(0, k) == doctest::Approx(std::sin(phase)).epsilon(1e-12));
    CHECK(enc(0, 5 + k) == doctest::Approx(std::cos(phase)).epsilon(1e-12));
  }
}

TEST_CASE("fourier_encode: deterministic and seed-sensitive in gaussian mode") {
  EncodingSpec spec;
  spec.mode = EncodingMode::GaussianRandom;
  spec.num_frequencies = 4;
  spec.seed = 11;
  std::vector<Vec3> pts = {{0.1, 0.2, 0.3}, {-0.5, 0.4, 0.9}};
  Eigen::MatrixXd a = fourier_encode(pts, spec);
  Eigen::MatrixXd b = fourier_encode(pts, spec);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  spec.seed = 12;
  Eigen::MatrixXd c = fourier_encode(pts, spec);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("fourier_encode: zero frequencies rejected") {
  EncodingSpec spec;
  spec.num_frequencies = 0;
  CHECK_THROWS_AS(fourier_encode({Vec3{0, 0, 0}}, spec), std::runtime_error);
}

TEST_CASE("init_field_params: deterministic, structured, bounded head") {
  EncodingSpec spec;
  FieldParams a = init_field_params(spec, HeadKind::Probability, 3, 16);
  FieldParams b = init_field_params(spec, HeadKind::Probability, 3, 16);
  CHECK(a.params == b.params);  // bit-identical
  FieldParams c = init_field_params(spec, HeadKind::Probability, 4, 16);
  CHECK(a.params != c.params);

  CHECK(a.params.size() == a.param_count());
  CHECK(a.running_mean.size() == 6 * 16);
  CHECK(a.running_var.size() == 6 * 16);
  for (double v : a.running_var) CHECK(v == 1.0);
  // gamma = 1, beta = 0, b = 0 per block; head bias 0.
  for (int k = 0; k < FieldParams::kNumBlocks; ++k) {
    for (int t = 0; t < 16; ++t) {
      CHECK(a.params[a.block_gamma_offset(k) + t] == 1.0);
      CHECK(a.params[a.block_beta_offset(k) + t] == 0.0);
      CHECK(a.params[a.block_b_offset(k) + t] == 0.0);
    }
  }
  CHECK(a.params[a.head_b_offset()] == 0.0);
  for (size_t t = a.head_w_offset(); t < a.head_b_offset(); ++t) {
    CHECK(std::abs(a.params[t]) < 0.1);  // sigma 0.01 head weights
  }
}

TEST_CASE("init_field_params: fresh probability head averages near 0.5") {
  EncodingSpec spec;
  FieldParams p = init_field_params(spec, HeadKind::Probability, 123, 32);
  Rng rng(5);
  std::vector<Vec3> pts = random_points(rng, 1000);
  std::vector<double> out = eval_localization(p, pts);
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= out.size();
  CHECK(mean > 0.35);
  CHECK(mean < 0.65);
}

TEST_CASE("init_field_params: fresh rgb head stays inside the unit cube") {
  EncodingSpec spec;
  FieldParams p = init_field_params(spec, HeadKind::Rgb, 9, 16);
  Rng rng(6);
  auto out = eval_texture(p, random_points(rng, 100));
  for (const auto& c : out) {
    for (double v : c) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("eval heads reject the wrong parameter kind") {
  EncodingSpec spec;
  FieldParams loc = init_field_params(spec, HeadKind::Probability, 1, 8);
  FieldParams tex = init_field_params(spec, HeadKind::Rgb, 1, 8);
  std::vector<Vec3> pts = {{0, 0, 0}};
  CHECK_THROWS_AS(eval_localization(tex, pts), std::runtime_error);
  CHECK_THROWS_AS(eval_texture(loc, pts), std::runtime_error);
}

TEST_CASE("zeroed head collapses the output to exactly 0.5") {
  EncodingSpec spec;
  FieldParams loc = init_field_params(spec, HeadKind::Probability, 2, 8);
  for (size_t t = loc.head_w_offset(); t < loc.param_count(); ++t) loc.params[t] = 0.0;
  Rng rng(8);
  for (double v : eval_localization(loc, random_points(rng, 20))) CHECK(v == 0.5);

  FieldParams tex = init_field_params(spec, HeadKind::Rgb, 2, 8);
  for (size_t t = tex.head_w_offset(); t < tex.param_count(); ++t) tex.params[t] = 0.0;
  for (const auto& c : eval_texture(tex, random_points(rng, 20))) {
    CHECK(c[0] == 0.5);
    CHECK(c[1] == 0.5);
    CHECK(c[2] == 0.5);
  }
}

TEST_CASE("field_forward: deterministic and range-bounded") {
  EncodingSpec spec;
  spec.num_frequencies = 3;
  FieldParams p = init_field_params(spec, HeadKind::Rgb, 17, 12);
  Rng rng(9);
  std::vector<Vec3> pts = random_points(rng, 50);
  FieldForward a = field_forward(p, pts, NormMode::Batch);
  FieldForward b = field_forward(p, pts, NormMode::Batch);
  CHECK((a.output - b.output).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < a.output.rows(); ++i)
    for (int j = 0; j < a.output.cols(); ++j) {
      CHECK(a.output(i, j) > 0.0);
      CHECK(a.output(i, j) < 1.0);
    }
}

TEST_CASE("field_forward: batch normalization centers and scales each block") {
  EncodingSpec spec;
  spec.num_frequencies = 2;
  FieldParams p = init_field_params(spec, HeadKind::Probability, 21, 10);
  Rng rng(10);
  std::vector<Vec3> pts = random_points(rng, 64);
  FieldForward fwd = field_forward(p, pts, NormMode::Batch);
  for (int k = 0; k < FieldParams::kNumBlocks; ++k) {
    Eigen::VectorXd mean = fwd.normalized[k].colwise().mean();
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-9);
    for (int t = 0; t < p.width; ++t) {
      double var = (fwd.normalized[k].col(t).array() - mean(t)).square().mean();
      // biased variance divided by (var + eps): slightly below 1
      CHECK(var > 0.5);
      CHECK(var < 1.0 + 1e-9);
    }
    // batch statistics recorded match direct recomputation
    Eigen::VectorXd mu = fwd.pre_norm[k].colwise().mean();
    CHECK((mu - fwd.batch_mean[k]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("update_running_stats: EMA with momentum, batch forwards only") {
  EncodingSpec spec;
  spec.num_frequencies = 2;
  FieldParams p = init_field_params(spec, HeadKind::Probability, 33, 6);
  Rng rng(11);
  std::vector<Vec3> pts = random_points(rng, 32);
  FieldForward fwd = field_forward(p, pts, NormMode::Batch);

  std::vector<double> mean_before = p.running_mean;
  std::vector<double> var_before = p.running_var;
  update_running_stats(p, fwd, 0.1);
  for (int k = 0; k < FieldParams::kNumBlocks; ++k) {
    for (int t = 0; t < p.width; ++t) {
      size_t idx = static_cast<size_t>(k) * p.width + t;
      double want_m = 0.9 * mean_before[idx] + 0.1 * fwd.batch_mean[k](t);
      double want_v = 0.9 * var_before[idx] + 0.1 * fwd.batch_var[k](t);
      CHECK(p.running_mean[idx] == doctest::Approx(want_m).epsilon(1e-12));
      CHECK(p.running_var[idx] == doctest::Approx(want_v).epsilon(1e-12));
    }
  }

  // Running-mode forwards leave the statistics untouched.
  std::vector<double> mean_now = p.running_mean;
  FieldForward run = field_forward(p, pts, NormMode::Running);
  update_running_stats(p, run, 0.1);
  CHECK(p.running_mean == mean_now);
}

TEST_CASE("field_backward: matches central finite differences in batch mode") {
  EncodingSpec spec;
  spec.num_frequencies = 2;
  Rng rng(40);
  for (int trial = 0; trial < 4; ++trial) {
    HeadKind kind = trial % 2 == 0 ? HeadKind::Probability : HeadKind::Rgb;
    FieldParams p = init_field_params(spec, kind, 100 + trial, 6);
    // Perturb away from the symmetric init so the check is not special-cased.
    for (double& v : p.params) v += 0.05 * rng.normal();
    std::vector<Vec3> pts = random_points(rng, 5);
    Eigen::MatrixXd c(5, p.out_dim());
    for (int i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform(-1.0, 1.0);

    FieldForward fwd = field_forward(p, pts, NormMode::Batch);
    std::vector<double> analytic = field_backward(p, fwd, c);

    auto f = [&](const std::vector<double>& flat) {
      return weighted_output_sum(p, flat, pts, c, NormMode::Batch);
    };
    std::vector<double> numeric = oracles::fd_gradient(f, p.params, 1e-5);
    CHECK(oracles::max_rel_err(analytic, numeric, 1e-5) < 1e-3);
  }
}

TEST_CASE("field_backward: matches central finite differences in running mode") {
  EncodingSpec spec;
  spec.num_frequencies = 2;
  spec.mode = EncodingMode::GaussianRandom;
  spec.seed = 3;
  Rng rng(41);
  FieldParams p = init_field_params(spec, HeadKind::Rgb, 55, 6);
  for (double& v : p.params) v += 0.05 * rng.normal();
  // Give the running statistics non-trivial values first.
  std::vector<Vec3> warm = random_points(rng, 40);
  update_running_stats(p, field_forward(p, warm, NormMode::Batch), 1.0);

  std::vector<Vec3> pts = random_points(rng, 4);
  Eigen::MatrixXd c(4, 3);
  for (int i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform(-1.0, 1.0);
  FieldForward fwd = field_forward(p, pts, NormMode::Running);
  std::vector<double> analytic = field_backward(p, fwd, c);
  auto f = [&](const std::vector<double>& flat) {
    return weighted_output_sum(p, flat, pts, c, NormMode::Running);
  };
  std::vector<double> numeric = oracles::fd_gradient(f, p.params, 1e-5);
  CHECK(oracles::max_rel_err(analytic, numeric, 1e-5) < 1e-3);
}

TEST_CASE("gradient correctness property: ten random parameter draws") {
  EncodingSpec spec;
  spec.num_frequencies = 1;
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    HeadKind kind = trial % 2 == 0 ? HeadKind::Probability : HeadKind::Rgb;
    FieldParams p = init_field_params(spec, kind, 500 + trial, 4);
    for (double& v : p.params) v = 0.3 * rng.normal();
    // Keep gammas near 1 so the network is well conditioned for FD.
    for (int k = 0; k < FieldParams::kNumBlocks; ++k)
      for (int t = 0; t < p.width; ++t) p.params[p.block_gamma_offset(k) + t] = 1.0 + 0.1 * rng.normal();
    std::vector<Vec3> pts = random_points(rng, 3);
    Eigen::MatrixXd c = Eigen::MatrixXd::Ones(3, p.out_dim());
    FieldForward fwd = field_forward(p, pts, NormMode::Batch);
    std::vector<double> analytic = field_backward(p, fwd, c);
    auto f = [&](const std::vector<double>& flat) {
      return weighted_output_sum(p, flat, pts, c, NormMode::Batch);
    };
    std::vector<double> numeric = oracles::fd_gradient(f, p.params, 1e-5);
    CHECK(oracles::max_rel_err(analytic, numeric, 1e-5) < 1e-3);
  }
}

TEST_CASE("single-weight finite difference on the public eval entry points") {
  EncodingSpec spec;
  FieldParams p = init_field_params(spec, HeadKind::Probability, 61, 8);
  std::vector<Vec3> pts = {{0.2, -0.4, 0.7}};
  // d(output_0)/d(params) via backward with unit upstream.
  FieldForward fwd = field_forward(p, pts, NormMode::Running);
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(1, 1);
  std::vector<double> g = field_backward(p, fwd, c);

  size_t idx = p.block_w_offset(3) + 5;  // an arbitrary mid-network weight
  double eps = 1e-5;
  FieldParams hi = p, lo = p;
  hi.params[idx] += eps;
  lo.params[idx] -= eps;
  double fd = (eval_localization(hi, pts)[0] - eval_localization(lo, pts)[0]) / (2 * eps);
  CHECK(g[idx] == doctest::Approx(fd).epsilon(1e-4));
}

TEST_CASE("extract_maps: covered texels equal direct evaluations, others are sentinels") {
  Mesh mesh = testutil::unit_square_mesh();
  // Shrink the chart so some texels stay uncovered.
  for (auto& uvs : mesh.corner_uvs)
    for (Vec2& t : uvs) t = {0.5 * t.x, 0.5 * t.y};
  SurfaceSampleSet samples = invert_uv(mesh, 8);
  REQUIRE(!samples.samples.empty());
  REQUIRE(samples.samples.size() < 64);

  EncodingSpec spec;
  FieldParams loc = init_field_params(spec, HeadKind::Probability, 71, 8);
  FieldParams tex = init_field_params(spec, HeadKind::Rgb, 72, 8);
  TextureMaps maps = extract_maps(loc, tex, samples);
  CHECK(maps.probability.height == 8);
  CHECK(maps.probability.channels == 1);
  CHECK(maps.rgb.channels == 3);

  std::vector<Vec3> pts;
  for (const auto& s : samples.samples) pts.push_back(s.point);
  std::vector<double> probs = eval_localization(loc, pts);
  auto colors = eval_texture(tex, pts);
  for (size_t n = 0; n < samples.samples.size(); ++n) {
    const auto& s = samples.samples[n];
    CHECK(maps.probability.at(s.j, s.i, 0) == probs[n]);
    for (int ch = 0; ch < 3; ++ch) CHECK(maps.rgb.at(s.j, s.i, ch) == colors[n][ch]);
  }
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i) {
      if (samples.covered(i, j)) continue;
      CHECK(maps.probability.at(j, i, 0) == 0.0);
      for (int ch = 0; ch < 3; ++ch) CHECK(maps.rgb.at(j, i, ch) == 0.0);
    }
}

TEST_CASE("extract_maps: constant-0.5 field and full-cover square chart") {
  Mesh mesh = testutil::unit_square_mesh();
  SurfaceSampleSet samples = invert_uv(mesh, 4);
  REQUIRE(samples.samples.size() == 16);

  EncodingSpec spec;
  FieldParams loc = init_field_params(spec, HeadKind::Probability, 81, 8);
  for (size_t t = loc.head_w_offset(); t < loc.param_count(); ++t) loc.params[t] = 0.0;
  FieldParams tex = init_field_params(spec, HeadKind::Rgb, 82, 8);
  TextureMaps maps = extract_maps(loc, tex, samples);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) CHECK(maps.probability.at(j, i, 0) == 0.5);
}

TEST_CASE("extract_maps: empty sample set is rejected") {
  SurfaceSampleSet samples;
  samples.resolution = 4;
  samples.coverage_mask.assign(16, 0);
  samples.sample_index.assign(16, -1);
  EncodingSpec spec;
  FieldParams loc = init_field_params(spec, HeadKind::Probability, 1, 4);
  FieldParams tex = init_field_params(spec, HeadKind::Rgb, 2, 4);
  CHECK_THROWS_AS(extract_maps(loc, tex, samples), std::runtime_error);
}
