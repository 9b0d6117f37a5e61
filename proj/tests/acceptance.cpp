// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "qcspharm/distortion.hpp"
#include "qcspharm/error.hpp"
#include "qcspharm/pipeline.hpp"
#include "qcspharm/serialize.hpp"
#include "qcspharm/sphere_sampling.hpp"
#include "support.hpp"

using namespace qcs;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void verdict(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%-44s %s  %s\n", name.c_str(), ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// ---- criterion 1 ----
void roundtrip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const auto base = test::ellipsoid(1.6, 1.0, 0.7, 4);
  const auto param = parametrize_sphere(base, 300, 1e-6);
  const int folds = check_bijectivity(param.param, base.faces());
  const auto truth = test::random_coeffs(8, rng);
  const auto positions = evaluate_surface(truth, param.param.points);
  const auto fit = fit_positions(positions, param.param.points, 8);
  double scale = 0.0;
  for (const auto& c : truth.data()) scale = std::max(scale, c.cwiseAbs().maxCoeff());
  const double rel = test::max_abs_diff(fit.coeffs, truth) / scale;
  const double secs = seconds_since(t0);
  verdict("1 SPHARM roundtrip L=8 on 2562 points", folds == 0 && rel <= 1e-8 && secs < 10.0,
          fmt("max relative error %.3e, folds %d, %.2f s", rel, folds, secs));
}

// ---- criterion 2 ----
void orthonormality() {
  const int L = 15;
  const auto pts = fibonacci_sphere(10000);
  const int n = coeff_count(L);
  Eigen::MatrixXcd y(n, static_cast<Eigen::Index>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) eval_basis(pts[i], L, y.col(static_cast<Eigen::Index>(i)).data());
  const Eigen::MatrixXcd gram = (4.0 * std::numbers::pi / pts.size()) * (y * y.adjoint());
  double off = 0.0, diag = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) diag = std::max(diag, std::abs(gram(i, j) - 1.0));
      else off = std::max(off, std::abs(gram(i, j)));
    }
  }
  verdict("2 basis orthonormality L=15, 10k points", off < 1e-3 && diag < 1e-3,
          fmt("max off-diagonal %.3e, max diagonal error %.3e", off, diag));
}

// ---- criteria 3 and 4 ----
double gauss_bonnet_error(const TriangleMesh& m) {
  const auto c = curvatures(m);
  double s = 0.0;
  for (size_t i = 0; i < c.gauss.size(); ++i) s += c.gauss[i] * c.vertex_area[i];
  return std::abs(s - 4.0 * std::numbers::pi);
}

void gauss_bonnet() {
  double worst = 0.0;
  int meshes = 0;
  auto add = [&](const TriangleMesh& m) {
    worst = std::max(worst, gauss_bonnet_error(m));
    ++meshes;
  };
  for (int level = 1; level <= 5; ++level) add(make_icosphere(level));
  add(test::ellipsoid(2.0, 1.0, 0.5, 4));
  add(test::ellipsoid(1.6, 1.0, 0.75, 3));
  add(test::ellipsoid(3.0, 0.4, 0.4, 4));
  CohortSpec spec;
  spec.subjects_per_class = 3;
  for (const auto& s : generate_cohort(spec).subjects) add(s.mesh);
  verdict("3 Gauss-Bonnet", worst <= 1e-6, fmt("%d meshes, max |sum K A - 4 pi| %.3e", meshes, worst));
}

void analytic_curvature() {
  const auto unit = make_icosphere(4);
  const auto c1 = curvatures(unit);
  const auto c2 = curvatures(scaled(unit, 2.0));
  double eh1 = 0, ek1 = 0, eh2 = 0, ek2 = 0;
  for (int i = 0; i < unit.vertex_count(); ++i) {
    eh1 = std::max(eh1, std::abs(c1.mean[i] - 1.0));
    ek1 = std::max(ek1, std::abs(c1.gauss[i] - 1.0));
    eh2 = std::max(eh2, std::abs(c2.mean[i] - 0.5) / 0.5);
    ek2 = std::max(ek2, std::abs(c2.gauss[i] - 0.25) / 0.25);
  }
  const double worst = std::max({eh1, ek1, eh2, ek2});
  verdict("4 analytic curvatures on icosphere level 4", worst <= 0.05,
          fmt("relative errors H %.4f K %.4f (r=1), H %.4f K %.4f (r=2)", eh1, ek1, eh2, ek2));
}

// ---- criterion 5 ----
TriangleMesh planar_grid(int n, double sx, double sy) {
  std::vector<Vec3> v;
  FaceList f;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) v.emplace_back(sx * i / (n - 1.0), sy * (j / (n - 1.0) + 0.13 * (i % 2)), 0.0);
  }
  for (int j = 0; j + 1 < n; ++j) {
    for (int i = 0; i + 1 < n; ++i) {
      const int a = j * n + i;
      f.push_back({a, a + 1, a + n + 1});
      f.push_back({a, a + n + 1, a + n});
    }
  }
  return TriangleMesh(std::move(v), std::move(f));
}

void beltrami() {
  std::mt19937_64 rng(105);
  const auto m = test::ellipsoid(1.5, 1.0, 0.7, 3);
  double conformal = 0.0;
  for (const auto& target : {m, transformed(scaled(m, 2.7), test::random_rotation(rng), Vec3(4, -3, 1))}) {
    for (double mu : face_beltrami_magnitude(m, target)) conformal = std::max(conformal, mu);
  }
  double stretch = 0.0;
  for (double mu : face_beltrami_magnitude(planar_grid(10, 1, 1), planar_grid(10, 2, 1))) {
    stretch = std::max(stretch, std::abs(mu - 1.0 / 3.0));
  }
  verdict("5 Beltrami closed forms", conformal <= 1e-9 && stretch <= 1e-6,
          fmt("identity/similarity max |mu| %.3e, stretch max ||mu| - 1/3| %.3e", conformal, stretch));
}

// ---- criterion 6 ----
double oracle_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  auto stats = [](const std::vector<double>& x, long double& mean, long double& ss) {
    mean = 0.0L;
    for (double v : x) mean += v;
    mean /= x.size();
    ss = 0.0L;
    for (double v : x) ss += (v - mean) * (v - mean);
  };
  long double ma, sa, mb, sb;
  stats(a, ma, sa);
  stats(b, mb, sb);
  const double nu = static_cast<double>(a.size() + b.size() - 2);
  const long double s2 = (sa + sb) / nu;
  const double t = static_cast<double>((ma - mb) / std::sqrt(s2 * (1.0L / a.size() + 1.0L / b.size())));
  const double logc = std::lgamma(0.5 * (nu + 1)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
  auto density = [&](double x) { return std::exp(logc - 0.5 * (nu + 1) * std::log1p(x * x / nu)); };
  boost::math::quadrature::exp_sinh<double> integrator;
  const double at = std::abs(t);
  return 2.0 * integrator.integrate([&](double u) { return density(at + u); }, 0.0,
                                    std::numeric_limits<double>::infinity(), 1e-15);
}

void ttest() {
  std::mt19937_64 rng(106);
  std::uniform_int_distribution<int> size(3, 50);
  std::uniform_real_distribution<double> shift(-1.5, 1.5);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> a(static_cast<size_t>(size(rng))), b(static_cast<size_t>(size(rng)));
    const double d = shift(rng);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = 1.3 * g(rng) + d;
    worst = std::max(worst, std::abs(two_sample_ttest(a, b).p - oracle_pvalue(a, b)));
  }
  const std::vector<int> labels{1, -1, 1, -1, 1, -1};
  Eigen::MatrixXd data(6, 8);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 8; ++j) data(i, j) = g(rng) + (labels[i] == 1 ? 0.3 * j : 0.0);
  }
  const auto bagged = bagged_ttest(data, labels);
  int mismatches = 0;
  for (int j = 0; j < 8; ++j) {
    double best = 1.0;
    for (int r = 0; r < 6; ++r) {
      std::vector<double> a, b;
      for (int i = 0; i < 6; ++i) {
        if (i != r) (labels[i] == 1 ? a : b).push_back(data(i, j));
      }
      const auto t = two_sample_ttest(a, b);
      best = std::min(best, t.degenerate ? 1.0 : t.p);
    }
    mismatches += bagged[j] != best;
  }
  verdict("6 t-test oracle and bagged min-p", worst <= 1e-10 && mismatches == 0,
          fmt("1000 pairs max |p - oracle| %.3e, leave-one-out mismatches %d", worst, mismatches));
}

// ---- criterion 7 ----
void svm() {
  std::mt19937_64 rng(107);
  std::normal_distribution<double> g;
  bool ok = true;
  double worst_margin = 1e9, worst_sum = 0.0;
  for (int dim : {1, 2, 5, 20}) {
    const int n = 40;
    Eigen::MatrixXd x(n, dim);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
      y.push_back(i < n / 2 ? 1 : -1);
      for (int j = 0; j < dim; ++j) x(i, j) = 0.3 * g(rng) + (j == 0 ? 2.0 * y.back() : 0.0);
    }
    const double C = 100.0;
    const auto m = train_svm(x, y, 0.5, C, 1e-6);
    ok = ok && m.converged;
    for (int i = 0; i < n; ++i) {
      const double f = m.decision(x.row(i).transpose());
      ok = ok && sign_label(f) == y[i];
      worst_margin = std::min(worst_margin, y[i] * f);
    }
    worst_sum = std::max(worst_sum, std::abs(m.dual_coeffs.sum()));
    for (int i = 0; i < m.dual_coeffs.size(); ++i) ok = ok && std::abs(m.dual_coeffs[i]) <= C + 1e-12;
  }
  ok = ok && worst_margin >= 1.0 - 1e-3 && worst_sum <= 1e-6;
  Eigen::MatrixXd xor_x(4, 2);
  xor_x << 1, 1, -1, -1, 1, -1, -1, 1;
  const std::vector<int> xor_y{1, 1, -1, -1};
  const auto xm = train_svm(xor_x, xor_y, 1.0, 10.0);
  int xor_ok = 0;
  for (int i = 0; i < 4; ++i) xor_ok += sign_label(xm.decision(xor_x.row(i).transpose())) == xor_y[i];
  ok = ok && xor_ok == 4;
  verdict("7 SVM correctness", ok,
          fmt("min y f(x) %.6f, max |sum alpha y| %.2e, XOR %d/4", worst_margin, worst_sum, xor_ok));
}

// ---- criteria 8 to 11: synthetic cohorts through the whole pipeline ----

// Desk-scale settings: degree cap and template size below the library
// defaults, quality improvement off (the generated meshes are already clean).
PipelineConfig acceptance_config(double amplitude, double volume_scale) {
  PipelineConfig c;
  c.L = 12;
  c.N = 2000;
  c.improve_enabled = false;
  c.align_samples = 800;
  c.param_iterations = 300;
  c.train_per_class = 20;
  c.test_per_class = 10;
  c.repetitions = 50;
  c.p_cut = 0.01;
  c.synth.subjects_per_class = 30;
  c.synth.amplitude = amplitude;
  c.synth.volume_scale = volume_scale;
  c.validate();
  return c;
}

struct Experiment {
  PipelineConfig config;
  Cohort cohort;
  CohortRun run;
  std::vector<int> truth_mask;
  double seconds = 0.0;
};

Experiment run_experiment(double amplitude, double volume_scale) {
  Experiment e;
  const auto t0 = Clock::now();
  e.config = acceptance_config(amplitude, volume_scale);
  e.cohort = generate_cohort(e.config.synth);
  std::vector<SubjectInput> inputs;
  for (const auto& s : e.cohort.subjects) inputs.push_back({s.id, s.label, s.mesh});
  e.run = run_pipeline(inputs, e.config);
  std::vector<TriangleMesh> registered;
  std::vector<SubjectAlignment> alignments;
  std::vector<Mat3> rotations;
  for (size_t i = 0; i < e.cohort.subjects.size(); ++i) {
    if (e.cohort.subjects[i].label != -1) continue;
    registered.push_back(e.run.registered[i]);
    alignments.push_back(e.run.alignments[i]);
    rotations.push_back(e.cohort.subjects[i].rotation);
  }
  e.truth_mask = template_truth_mask(registered, alignments, rotations, e.cohort.truth);
  e.seconds = seconds_since(t0);
  return e;
}

EvaluationReport evaluate_method(const Experiment& e, Method m, double p_cut) {
  auto o = e.config.eval_options();
  o.method = m;
  return evaluate(e.run.matrix, p_cut, o);
}

}  // namespace

int main() {
  try {
    roundtrip();
    orthonormality();
    gauss_bonnet();
    analytic_curvature();
    beltrami();
    ttest();
    svm();

    const auto strong = run_experiment(0.15, 0.97);
    const auto strong_report = evaluate_method(strong, Method::QcSpharm, strong.config.p_cut);
    const auto null = run_experiment(0.0, 1.0);
    const auto null_report = evaluate_method(null, Method::QcSpharm, null.config.p_cut);
    verdict("8 end-to-end discrimination",
            strong_report.mean_accuracy >= 0.90 && null_report.mean_accuracy >= 0.35 &&
                null_report.mean_accuracy <= 0.65,
            fmt("strong %.3f (>= 0.90), null %.3f (in [0.35, 0.65]), pipeline %.0f s + %.0f s",
                strong_report.mean_accuracy, null_report.mean_accuracy, strong.seconds, null.seconds));

    auto o = strong.config.eval_options();
    const auto sweep = sweep_pcut(strong.run.matrix, strong.config.p_cut_grid, o);
    const size_t best = best_grid_index(sweep);
    double recall = 0.0;
    for (const auto& r : sweep[best].repetitions) {
      recall += shape_recall(r.omega, strong.run.matrix.schema, strong.truth_mask) / sweep[best].repetitions.size();
    }
    std::printf("  selected features by block on the strong cohort (qc-spharm):\n");
    std::printf("  %-10s %-9s %-9s %-9s %-9s %-8s\n", "p_cut", "shape", "spharm", "volume", "total", "accuracy");
    for (const auto& r : sweep) {
      std::printf("  %-10.4g %-9.1f %-9.1f %-9.2f %-9.1f %-8.3f\n", r.p_cut, r.mean_shape, r.mean_spharm,
                  r.mean_volume, r.mean_shape + r.mean_spharm + r.mean_volume, r.mean_accuracy);
    }
    const bool interior = best > 0 && best + 1 < sweep.size();
    std::printf("  best p_cut %.4g (%s maximum), ground-truth vertices %zu\n", sweep[best].p_cut,
                interior ? "interior" : "boundary", strong.truth_mask.size());
    verdict("9 selection localization", !strong.truth_mask.empty() && recall >= 0.5,
            fmt("mean shape recall %.3f at p_cut %.4g", recall, sweep[best].p_cut));

    const auto mixed = run_experiment(0.05, 0.97);
    std::vector<EvaluationReport> table;
    for (Method m : {Method::QcSpharm, Method::Qc, Method::Spharm, Method::Volume}) {
      table.push_back(evaluate_method(mixed, m, mixed.config.p_cut));
    }
    std::printf("  comparison on the mixed cohort:\n");
    std::string csv = comparison_table(table);
    for (size_t pos = 0, next; pos < csv.size(); pos = next + 1) {
      next = csv.find('\n', pos);
      std::printf("  %s\n", csv.substr(pos, next - pos).c_str());
    }
    bool ordered = true;
    for (size_t k = 1; k < table.size(); ++k) ordered = ordered && table[0].mean_accuracy >= table[k].mean_accuracy;
    std::printf("  for reference, each method at its best grid p_cut (same splits):\n");
    for (Method m : {Method::QcSpharm, Method::Qc, Method::Spharm}) {
      auto om = mixed.config.eval_options();
      om.method = m;
      const auto sw = sweep_pcut(mixed.run.matrix, mixed.config.p_cut_grid, om);
      const auto& b = sw[best_grid_index(sw)];
      std::printf("  %-10s p_cut %-9.4g accuracy %.3f\n", method_name(m).c_str(), b.p_cut, b.mean_accuracy);
    }
    verdict("10 method ordering on the mixed cohort", ordered,
            fmt("qc-spharm %.3f, qc %.3f, spharm %.3f, volume %.3f", table[0].mean_accuracy,
                table[1].mean_accuracy, table[2].mean_accuracy, table[3].mean_accuracy));

    const auto again = run_experiment(0.15, 0.97);
    const auto again_report = evaluate_method(again, Method::QcSpharm, again.config.p_cut);
    const std::string a = report_to_json(strong_report).dump(), b = report_to_json(again_report).dump();
    verdict("11 reproducibility", a == b,
            fmt("report sha256 %s vs %s", sha256_hex(a).substr(0, 16).c_str(), sha256_hex(b).substr(0, 16).c_str()));

    // Supplementary properties of the synthetic protocol.
    const auto volume_only = run_experiment(0.0, 0.97);
    const auto vol = evaluate_method(volume_only, Method::Volume, volume_only.config.p_cut);
    verdict("   volume-only cohort, volume method", vol.mean_accuracy > 0.65,
            fmt("accuracy %.3f (chance band upper edge 0.65)", vol.mean_accuracy));
    const double a0 = evaluate_method(volume_only, Method::QcSpharm, 0.01).mean_accuracy;
    const double a1 = table[0].mean_accuracy;
    const double a2 = strong_report.mean_accuracy;
    verdict("   accuracy trend over amplitude 0, 0.05, 0.15", a0 <= a1 && a1 <= a2,
            fmt("%.3f, %.3f, %.3f", a0, a1, a2));
  } catch (const Error& e) {
    std::printf("acceptance aborted: %s (%s)\n", e.what(), std::string(to_string(e.code())).c_str());
    return 2;
  }
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
