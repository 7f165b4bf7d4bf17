#include "run_config.hpp"

#include <set>

namespace hyperfit::cli {

using nlohmann::json;

namespace {

void check_keys(const json& doc, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!doc.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : doc.items())
    if (!ok.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

IcnnArch parse_arch(const json& doc) {
  check_keys(doc, "architecture", {"widths", "passthrough"});
  IcnnArch arch;
  arch.widths = doc.at("widths").get<std::vector<int>>();
  arch.passthrough = doc.value("passthrough", arch.widths.size() >= 2);
  validate(arch);
  return arch;
}

StripGeometry parse_strip(const json& doc) {
  StripGeometry g;
  read(doc, "width", g.width);
  read(doc, "height", g.height);
  read(doc, "nx", g.nx);
  read(doc, "ny", g.ny);
  read(doc, "thickness", g.thickness);
  return g;
}

}  // namespace

Geometry parse_geometry(const json& doc) {
  check_keys(doc, "geometry", {"kind", "width", "height", "nx", "ny", "thickness", "removed"});
  const auto kind = doc.value("kind", std::string("strip"));
  if (kind == "strip") {
    if (doc.contains("removed")) throw ConfigError("geometry: 'removed' requires kind 'notched'");
    return parse_strip(doc);
  }
  if (kind == "notched") {
    NotchedStripGeometry g{parse_strip(doc), {}};
    for (const auto& e : doc.value("removed", json::array())) g.removed.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return g;
  }
  throw ConfigError("geometry: unknown kind '" + kind + "'");
}

json geometry_json(const Geometry& geometry) {
  const auto strip = [](const StripGeometry& s) {
    return json{{"width", s.width}, {"height", s.height}, {"nx", s.nx}, {"ny", s.ny}, {"thickness", s.thickness}};
  };
  if (const auto* s = std::get_if<StripGeometry>(&geometry)) {
    auto doc = strip(*s);
    doc["kind"] = "strip";
    return doc;
  }
  const auto& n = std::get<NotchedStripGeometry>(geometry);
  auto doc = strip(n.strip);
  doc["kind"] = "notched";
  doc["removed"] = json::array();
  for (const auto& [i, j] : n.removed) doc["removed"].push_back({i, j});
  return doc;
}

GroundTruthMaterial parse_material(const json& doc) {
  check_keys(doc, "material", {"kind", "mu", "lambda", "c10", "c01"});
  const auto kind = doc.value("kind", std::string("mooney_rivlin"));
  GroundTruthMaterial m;
  if (kind == "neo_hookean") {
    NeoHookeanTruth t;
    read(doc, "mu", t.mu);
    read(doc, "lambda", t.lambda);
    m = t;
  } else if (kind == "mooney_rivlin") {
    MooneyRivlinTruth t;
    read(doc, "c10", t.c10);
    read(doc, "c01", t.c01);
    read(doc, "lambda", t.lambda);
    m = t;
  } else {
    throw ConfigError("material: unknown kind '" + kind + "'");
  }
  validate(m);
  return m;
}

json material_json(const GroundTruthMaterial& material) {
  if (const auto* n = std::get_if<NeoHookeanTruth>(&material))
    return {{"kind", "neo_hookean"}, {"mu", n->mu}, {"lambda", n->lambda}};
  const auto& m = std::get<MooneyRivlinTruth>(material);
  return {{"kind", "mooney_rivlin"}, {"c10", m.c10}, {"c01", m.c01}, {"lambda", m.lambda}};
}

void apply_json(RunConfig& cfg, const json& doc) {
  try {
    check_keys(doc, "config", {"output_dir", "data_dir", "mode", "lambda_r", "experiments", "split", "optim", "model",
                               "sweep", "model_in", "model_out", "predict", "generate", "scan"});
    if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
    if (doc.contains("data_dir")) cfg.data_dir = doc.at("data_dir").get<std::string>();
    if (doc.contains("mode")) cfg.mode = parse_kinematic_mode(doc.at("mode").get<std::string>());
    read(doc, "lambda_r", cfg.loss.lambda_r);
    if (doc.contains("experiments")) {
      cfg.experiments.clear();
      for (const auto& e : doc.at("experiments")) {
        check_keys(e, "experiment", {"name", "mesh", "dataset"});
        cfg.experiments.push_back({e.at("name").get<std::string>(), e.at("mesh").get<std::string>(),
                                   e.at("dataset").get<std::string>()});
      }
    }
    if (doc.contains("split")) {
      const auto& s = doc.at("split");
      check_keys(s, "split", {"n_train", "n_val", "source"});
      read(s, "n_train", cfg.split.n_train);
      read(s, "n_val", cfg.split.n_val);
      read(s, "source", cfg.split_source);
    }
    if (doc.contains("optim")) {
      const auto& o = doc.at("optim");
      check_keys(o, "optim", {"learning_rate", "beta1", "beta2", "epsilon", "max_epochs", "patience", "seed"});
      read(o, "learning_rate", cfg.optim.learning_rate);
      read(o, "beta1", cfg.optim.beta1);
      read(o, "beta2", cfg.optim.beta2);
      read(o, "epsilon", cfg.optim.epsilon);
      read(o, "max_epochs", cfg.optim.max_epochs);
      read(o, "patience", cfg.optim.patience);
      read(o, "seed", cfg.optim.seed);
    }
    if (doc.contains("model")) {
      const auto& m = doc.at("model");
      check_keys(m, "model", {"kind", "mu", "lambda", "widths", "passthrough"});
      read(m, "kind", cfg.init.kind);
      if (cfg.init.kind != "pann" && cfg.init.kind != "neo_hookean")
        throw ConfigError("model: unknown kind '" + cfg.init.kind + "'");
      read(m, "mu", cfg.init.mu);
      read(m, "lambda", cfg.init.lambda);
      if (m.contains("widths")) {
        json arch{{"widths", m.at("widths")}};
        if (m.contains("passthrough")) arch["passthrough"] = m.at("passthrough");
        cfg.init.arch = parse_arch(arch);
      }
    }
    if (doc.contains("sweep")) {
      const auto& s = doc.at("sweep");
      check_keys(s, "sweep", {"architectures"});
      cfg.sweep_archs.clear();
      for (const auto& a : s.at("architectures")) cfg.sweep_archs.push_back(parse_arch(a));
    }
    if (doc.contains("model_in")) cfg.model_in = doc.at("model_in").get<std::string>();
    read(doc, "model_out", cfg.model_out);
    if (doc.contains("predict")) {
      const auto& p = doc.at("predict");
      check_keys(p, "predict", {"input"});
      cfg.predict_input = p.at("input").get<std::string>();
    }
    if (doc.contains("generate")) {
      const auto& g = doc.at("generate");
      check_keys(g, "generate", {"material", "programs", "geometry", "stretches", "noise", "max_increment",
                                 "max_bisections", "tolerance"});
      if (g.contains("material")) cfg.generate.material = parse_material(g.at("material"));
      if (g.contains("programs")) {
        cfg.generate.programs.clear();
        for (const auto& p : g.at("programs")) {
          check_keys(p, "program", {"name", "geometry", "stretches"});
          cfg.generate.programs.push_back(
              {p.at("name").get<std::string>(),
               LoadProgram{parse_geometry(p.at("geometry")), p.at("stretches").get<std::vector<double>>()}});
        }
      }
      if (g.contains("geometry") || g.contains("stretches")) {
        // single-program form: {"material", "geometry", "stretches", "noise"}
        cfg.generate.programs = {{"experiment", LoadProgram{parse_geometry(g.at("geometry")),
                                                            g.at("stretches").get<std::vector<double>>()}}};
      }
      if (g.contains("noise")) {
        const auto& n = g.at("noise");
        check_keys(n, "noise", {"sigma_u", "sigma_r", "seed"});
        read(n, "sigma_u", cfg.generate.noise.sigma_u);
        read(n, "sigma_r", cfg.generate.noise.sigma_r);
        read(n, "seed", cfg.generate.noise.seed);
      }
      read(g, "max_increment", cfg.generate.solver.max_increment);
      read(g, "max_bisections", cfg.generate.solver.max_bisections);
      read(g, "tolerance", cfg.generate.solver.tolerance);
    }
    if (doc.contains("scan")) {
      const auto& s = doc.at("scan");
      check_keys(s, "scan", {"experiment", "stretches", "substeps"});
      read(s, "experiment", cfg.scan.experiment);
      read(s, "stretches", cfg.scan.stretches);
      read(s, "substeps", cfg.scan.substeps);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::vector<ExperimentFiles> experiment_files(const RunConfig& cfg) {
  if (!cfg.experiments.empty()) return cfg.experiments;
  const auto dir = cfg.data_dir.value_or(cfg.output_dir);
  std::vector<ExperimentFiles> out;
  for (const auto& p : cfg.generate.programs)
    out.push_back({p.name, dir / (p.name + ".mesh.json"), dir / (p.name + ".dataset.json")});
  return out;
}

}  // namespace hyperfit::cli
