// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero when
// any criterion fails. Criteria 7, 8 and 11 drive the command-line tool.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "hyperfit/datagen.hpp"
#include "hyperfit/equilibrium.hpp"
#include "hyperfit/training.hpp"
#include "support.hpp"

using namespace hyperfit;
namespace fs = std::filesystem;

namespace {

// pinned tolerances and budgets
constexpr double kGradientRelTol = 1e-5;
constexpr double kGradientSeconds = 120.0;
constexpr double kJensenSlack = -1e-12;
constexpr double kNormalizationTol = 1e-12;
constexpr double kSymmetryTol = 1e-10;
constexpr double kForceSumTol = 1e-10;
constexpr double kForceFdRelTol = 1e-6;
constexpr double kClosedLoopTol = 1e-8;
constexpr double kRecoveryCleanTol = 0.01;
constexpr double kRecoveryNoisyTol = 0.05;
constexpr double kNoiseFraction = 0.005;
constexpr double kRecoverySeconds = 300.0;
constexpr double kSeparationSeconds = 1800.0;
constexpr double kJumpRatio = 2.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> perturbed(const std::vector<double>& theta, std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  auto t = theta;
  for (auto& v : t) v += n(rng);
  return t;
}

const fs::path kWork = HYPERFIT_ACCEPTANCE_DIR;
const std::string kCli = HYPERFIT_CLI_PATH;

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + kCli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

/// (mean loss, median inner residual) from a metrics.csv.
std::pair<double, double> read_metrics(const fs::path& p) {
  const auto rows = read_csv(p);
  double mean_loss = NAN, median_inner = NAN;
  for (const auto& r : rows) {
    if (r.size() != 4) continue;
    if (r[0] == "mean") mean_loss = std::stod(r[3]);
    if (r[0] == "median") median_inner = std::stod(r[1]);
  }
  return {mean_loss, median_inner};
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  // two elements with two free nodes keep the per-parameter differences affordable
  const Mesh mesh = generate_mesh(StripGeometry{2, 4, 1, 2, 1.0});
  const auto quad = precompute_quadrature(mesh);
  const Dataset data = forward_solve(mesh, GroundTruthMaterial{MooneyRivlinTruth{}}, KinematicMode::PlaneStrain,
                                     std::vector<double>{1.25});
  const std::vector<std::string> react{"top"}, fixed{"bottom"};
  const DofPartition part = make_partition(mesh, react, fixed);
  std::vector<const LoadStep*> steps;
  for (const auto& s : data.steps) steps.push_back(&s);

  double worst = 0.0;
  std::uint64_t seed = 1;
  for (const auto& arch : default_sweep_architectures()) {
    const Model model = PannModel(arch, perturbed(init_params(arch, seed), seed, 0.1));
    ++seed;
    const auto lg = loss_gradient(mesh, quad, model, steps, part);
    const auto loss_at = [&](const std::vector<double>& theta) {
      const Model m = with_parameters(model, theta);
      double sum = 0.0;
      for (const auto* s : steps) sum += equilibrium_loss(mesh, quad, m, *s, part).loss;
      return sum;
    };
    auto theta = parameters(model);
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(theta[i]));
      const double keep = theta[i];
      theta[i] = keep + h;
      const double lp = loss_at(theta);
      theta[i] = keep - h;
      const double lm = loss_at(theta);
      theta[i] = keep;
      const double fd = (lp - lm) / (2 * h);
      diff += (fd - lg.gradient[i]) * (fd - lg.gradient[i]);
      norm += fd * fd;
    }
    worst = std::max(worst, std::sqrt(diff / std::max(norm, 1e-300)));
  }
  const double secs = seconds_since(t0);
  return {worst < kGradientRelTol && secs < kGradientSeconds,
          "worst relative error " + fmt(worst) + " over 10 architectures in " + fmt(secs) + " s"};
}

Outcome convexity() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0), coord(-2.0, 6.0);
  const auto archs = default_sweep_architectures();
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    const auto& arch = archs[static_cast<std::size_t>(i) % archs.size()];
    const Icnn net(arch, perturbed(init_params(arch, static_cast<std::uint64_t>(i)), 7 + i, 0.5));
    std::vector<double> x(4), y(4), m(4);
    for (auto& v : x) v = coord(rng);
    for (auto& v : y) v = coord(rng);
    const double t = unit(rng);
    for (std::size_t k = 0; k < 4; ++k) m[k] = t * x[k] + (1 - t) * y[k];
    worst = std::min(worst, t * net.forward(x) + (1 - t) * net.forward(y) - net.forward(m));
  }
  return {worst >= kJensenSlack, "1000 triples, smallest slack " + fmt(worst)};
}

Outcome normalization() {
  std::mt19937_64 rng(99);
  double w_max = 0.0, p_max = 0.0, sym_max = 0.0;
  const IcnnArch arch{4, {16, 16}, true};
  for (int i = 0; i < 100; ++i) {
    const auto mode = i % 2 == 0 ? KinematicMode::PlaneStrain : KinematicMode::IncompressiblePlaneStress;
    const Model model = PannModel(arch, perturbed(init_params(arch, static_cast<std::uint64_t>(i)), 500 + i, 0.5), mode);
    w_max = std::max(w_max, std::abs(energy(model, Mat3::Identity())));
    p_max = std::max(p_max, stress(model, Mat3::Identity()).norm());
  }
  for (int mi = 0; mi < 2; ++mi) {
    const auto mode = mi == 0 ? KinematicMode::PlaneStrain : KinematicMode::IncompressiblePlaneStress;
    const Model model = PannModel(arch, perturbed(init_params(arch, 3), 4, 0.5), mode);
    const Law law = make_law(model);
    for (int r = 0; r < 50; ++r) {
      const Mat3 f = admissible_deformation(hftest::random_f2(rng), mode);
      const Mat3 q = hftest::planar_rotation(rng);
      const double w = law.energy(f);
      const Mat3 p = law.stress(f);
      sym_max = std::max(sym_max, hftest::rel_err(law.energy(q * f), w));
      sym_max = std::max(sym_max, hftest::rel_err(law.energy(f * q), w));
      sym_max = std::max(sym_max, hftest::rel_err(law.stress(q * f), Mat3(q * p)));
      sym_max = std::max(sym_max, hftest::rel_err(law.stress(f * q), Mat3(p * q)));
    }
  }
  const bool ok = w_max < kNormalizationTol && p_max < kNormalizationTol && sym_max < kSymmetryTol;
  return {ok, "max |W(I)| " + fmt(w_max) + ", max |P(I)| " + fmt(p_max) + ", objectivity/isotropy " + fmt(sym_max)};
}

Outcome self_equilibration() {
  std::mt19937_64 rng(5);
  const Mesh mesh = generate_mesh(StripGeometry{4, 8, 4, 8, 1.0});
  const auto quad = precompute_quadrature(mesh);
  const IcnnArch arch{4, {16, 16}, true};
  double sum_max = 0.0, fd_max = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Model model = i % 2 == 0 ? Model{PannModel(arch, perturbed(init_params(arch, 11 + i), 13 + i, 0.3))}
                                   : Model{NeoHookeanModel::from_moduli(0.2 + 0.01 * i, 3.0)};
    const auto u = hftest::random_field(mesh.node_count(), rng, 0.1);
    const auto f = internal_forces(mesh, quad, model, u);
    Vec2 total = Vec2::Zero();
    for (const auto& v : f) total += v;
    sum_max = std::max(sum_max, total.norm());
    if (i % 10 == 0) {
      const Law law = make_law(model);
      auto up = u;
      double diff = 0.0, norm = 0.0;
      for (std::size_t a = 0; a < u.size(); ++a)
        for (int c = 0; c < 2; ++c) {
          const double keep = up[a](c);
          up[a](c) = keep + 1e-6;
          const double ep = stored_energy(mesh, quad, law, up);
          up[a](c) = keep - 1e-6;
          const double em = stored_energy(mesh, quad, law, up);
          up[a](c) = keep;
          const double fd = (ep - em) / 2e-6;
          diff += (fd - f[a](c)) * (fd - f[a](c));
          norm += fd * fd;
        }
      fd_max = std::max(fd_max, std::sqrt(diff / norm));
    }
  }
  return {sum_max < kForceSumTol && fd_max < kForceFdRelTol,
          "max |sum f| " + fmt(sum_max) + " N, force vs energy derivative " + fmt(fd_max)};
}

Outcome closed_loop() {
  double worst = 0.0;
  std::size_t count = 0;
  const std::vector<std::string> react{"top"}, fixed{"bottom"};
  for (const auto mode : {KinematicMode::PlaneStrain, KinematicMode::IncompressiblePlaneStress})
    for (const GroundTruthMaterial& mat : {GroundTruthMaterial{MooneyRivlinTruth{}}, GroundTruthMaterial{NeoHookeanTruth{}}})
      for (const auto& p : default_programs()) {
        const Mesh mesh = generate_mesh(p.program.geometry);
        const auto quad = precompute_quadrature(mesh);
        const auto part = make_partition(mesh, react, fixed);
        const Dataset d = forward_solve(mesh, mat, mode, p.program.stretches);
        const Law law = make_law(mat, mode);
        for (const auto& s : d.steps) {
          worst = std::max(worst, equilibrium_loss(mesh, quad, law, s, part).loss);
          ++count;
        }
      }
  return {worst < kClosedLoopTol, std::to_string(count) + " steps, worst loss " + fmt(worst)};
}

Outcome parameter_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const StripGeometry strip;  // 8 x 24 elements
  const Mesh mesh = generate_mesh(strip);
  const Dataset clean = forward_solve(mesh, GroundTruthMaterial{NeoHookeanTruth{0.4, 4.0}}, KinematicMode::PlaneStrain,
                                      uniform_stretches(1.5, 26));
  double u_max = 0.0;
  for (const auto& s : clean.steps)
    for (const auto& u : s.displacements) u_max = std::max(u_max, u.norm());
  const Dataset noisy = add_noise(clean, NoiseSpec{kNoiseFraction * u_max, 0.0, 17});

  OptimConfig opt;
  opt.learning_rate = 0.05;
  const auto fit = [&](const Dataset& d) {
    const Corpus corpus({Experiment{"strip", mesh, d}});
    const auto counts = corpus.step_counts();
    const Split split = split_dataset(counts, SplitConfig{20, 6, 0});
    const auto r = train(NeoHookeanModel::from_moduli(1.0, 1.0), corpus, split, LossSetup{}, opt);
    return std::get<NeoHookeanModel>(r.model).mu();
  };
  const double mu_clean = fit(clean);
  const double mu_noisy = fit(noisy);
  const double e_clean = std::abs(mu_clean - 0.4) / 0.4;
  const double e_noisy = std::abs(mu_noisy - 0.4) / 0.4;
  const double secs = seconds_since(t0);
  return {e_clean < kRecoveryCleanTol && e_noisy < kRecoveryNoisyTol && secs < kRecoverySeconds,
          "noise-free mu " + fmt(mu_clean) + " (error " + fmt(100 * e_clean) + "%), sigma_u " +
              fmt(kNoiseFraction * u_max) + " mm mu " + fmt(mu_noisy) + " (error " + fmt(100 * e_noisy) + "%), " +
              fmt(secs) + " s"};
}

// Criterion 7 pipeline, reused by 10 and 11.
const char* kPannConfig = R"({"mode": "incompressible_plane_stress",
  "model": {"kind": "pann", "widths": [16, 16], "passthrough": true},
  "optim": {"learning_rate": 0.01, "max_epochs": 3000, "patience": 200, "seed": 0}})";
const char* kNhConfig = R"({"mode": "incompressible_plane_stress",
  "model": {"kind": "neo_hookean", "mu": 1.0, "lambda": 1.0},
  "optim": {"learning_rate": 0.05, "max_epochs": 3000, "patience": 200, "seed": 0}})";

bool run_separation(const fs::path& dir, std::string& error) {
  fs::remove_all(dir);
  for (const char* sub : {"data", "nh", "pann"}) fs::create_directories(dir / sub);
  write_file(dir / "nh.json", kNhConfig);
  write_file(dir / "pann.json", kPannConfig);
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  const std::vector<std::pair<std::string, std::string>> steps{
      {"generate", "generate --mode incompressible_plane_stress --deterministic --output-dir " + q(dir / "data")},
      {"train nh", "train --config " + q(dir / "nh.json") + " --deterministic --data-dir " + q(dir / "data") +
                       " --output-dir " + q(dir / "nh")},
      {"train pann", "train --config " + q(dir / "pann.json") + " --deterministic --data-dir " + q(dir / "data") +
                         " --output-dir " + q(dir / "pann")},
  };
  for (const auto& [name, args] : steps) {
    const int rc = run_cli(args, dir / (name + ".log"));
    if (rc != 0) {
      error = name + " exited with " + std::to_string(rc);
      return false;
    }
  }
  return true;
}

Outcome model_class_separation() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string error;
  if (!run_separation(kWork / "run_a", error)) return {false, error};
  const auto [nh_loss, nh_inner] = read_metrics(kWork / "run_a" / "nh" / "metrics.csv");
  const auto [pann_loss, pann_inner] = read_metrics(kWork / "run_a" / "pann" / "metrics.csv");
  const double secs = seconds_since(t0);
  return {pann_loss < nh_loss && pann_inner < nh_inner && secs < kSeparationSeconds,
          "incompressible plane stress, test mean loss PANN " + fmt(pann_loss) + " vs NH " + fmt(nh_loss) +
              ", median inner residual PANN " + fmt(pann_inner) + " vs NH " + fmt(nh_inner) + ", " + fmt(secs) + " s"};
}

Outcome sweep_bracket() {
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& a : default_sweep_architectures()) {
    lo = std::min(lo, count_parameters(a));
    hi = std::max(hi, count_parameters(a));
  }
  const fs::path dir = kWork / "sweep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path data = kWork / "run_a" / "data";
  const int rc = run_cli("sweep --mode incompressible_plane_stress --max-epochs 2 --deterministic --data-dir \"" +
                             data.string() + "\" --output-dir \"" + dir.string() + "\"",
                         dir / "sweep.log");
  const auto rows = read_csv(dir / "sweep.csv");
  std::size_t n = 0, selected = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ++n;
    if (rows[i].size() == 5 && rows[i][4] == "1") ++selected;
  }
  const bool header = !rows.empty() && rows[0] == std::vector<std::string>{"arch_id", "params", "train_loss", "val_loss",
                                                                           "selected"};
  return {lo <= 145 && hi >= 17217 && rc == 0 && header && n == 10 && selected == 1,
          "parameter counts " + std::to_string(lo) + ".." + std::to_string(hi) + ", sweep CSV " + std::to_string(n) +
              " rows, " + std::to_string(selected) + " selected"};
}

Outcome split_arithmetic() {
  const Mesh mesh = generate_mesh(StripGeometry{2, 4, 1, 2, 1.0});
  const GroundTruthMaterial mat = NeoHookeanTruth{};
  std::vector<Experiment> ex;
  ex.push_back({"a", mesh, forward_solve(mesh, mat, KinematicMode::PlaneStrain, uniform_stretches(1.3, 300))});
  ex.push_back({"b", mesh, forward_solve(mesh, mat, KinematicMode::PlaneStrain, uniform_stretches(1.4, 361))});
  const Corpus corpus(std::move(ex));
  const auto counts = corpus.step_counts();
  const Split split = split_dataset(counts, SplitConfig{20, 6, 0});
  OptimConfig opt;
  opt.learning_rate = 0.05;
  opt.max_epochs = 50;
  train(NeoHookeanModel::from_moduli(1.0, 1.0), corpus, split, LossSetup{}, opt);
  std::size_t leaks = 0;
  for (const auto& t : split.test)
    leaks += corpus.access_count(t, Access::Gradient) + corpus.access_count(t, Access::Validation);
  std::size_t train_hits = 0;
  for (const auto& t : split.train) train_hits += corpus.access_count(t, Access::Gradient) > 0 ? 1 : 0;
  return {split.train.size() == 20 && split.val.size() == 6 && split.test.size() == 635 && leaks == 0 &&
              train_hits == 20,
          std::to_string(counts[0] + counts[1]) + " steps -> " + std::to_string(split.train.size()) + "/" +
              std::to_string(split.val.size()) + "/" + std::to_string(split.test.size()) + ", test-step accesses " +
              std::to_string(leaks)};
}

Outcome continuity() {
  const fs::path dir = kWork / "run_a";
  std::ifstream model_in(dir / "pann" / "model.json");
  std::ifstream mesh_in(dir / "data" / "strip.mesh.json");
  if (!model_in || !mesh_in) return {false, "criterion 7 artifacts missing"};
  const Model model = load_model(model_in);
  const Mesh mesh = load_mesh(mesh_in);
  const auto program = uniform_stretches(1.5, 26);
  const ContinuityScan scan = continuity_scan(model, mesh, program, 100);
  const double ratio = scan.jump_ratio().value_or(INFINITY);
  return {ratio < kJumpRatio, "100 substeps to stretch 1.5, max jump / mean increment " + fmt(ratio)};
}

Outcome determinism() {
  std::string error;
  if (!run_separation(kWork / "run_b", error)) return {false, error};
  std::size_t compared = 0, differing = 0;
  for (const char* sub : {"data", "nh", "pann"})
    for (const auto& entry : fs::directory_iterator(kWork / "run_a" / sub)) {
      const auto other = kWork / "run_b" / sub / entry.path().filename();
      ++compared;
      if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) ++differing;
    }
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " artifacts compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  fs::create_directories(kWork);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"convexity", convexity},
      {"normalization", normalization},
      {"self-equilibration", self_equilibration},
      {"closed-loop zero", closed_loop},
      {"parameter recovery", parameter_recovery},
      {"model-class separation", model_class_separation},
      {"sweep bracket", sweep_bracket},
      {"split arithmetic", split_arithmetic},
      {"continuity", continuity},
      {"determinism", determinism},
  };
  int failures = 0;
  int id = 0;
  for (const auto& [name, check] : criteria) {
    ++id;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria pass"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
