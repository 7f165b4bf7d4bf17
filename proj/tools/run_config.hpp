#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperfit/datagen.hpp"
#include "hyperfit/training.hpp"

namespace hyperfit::cli {

/// One experiment on disk: a mesh file and the dataset recorded on it.
struct ExperimentFiles {
  std::string name;
  std::filesystem::path mesh;
  std::filesystem::path dataset;
};

/// Initial model for `train`: a Neo-Hookean pair of moduli or a freshly seeded PANN.
struct ModelInit {
  std::string kind = "pann";
  double mu = 1.0;
  double lambda = 1.0;
  IcnnArch arch{4, {16, 16}, true};
};

struct GenerateConfig {
  GroundTruthMaterial material = MooneyRivlinTruth{};
  std::vector<NamedProgram> programs = default_programs();
  NoiseSpec noise;
  SolverOptions solver;
};

struct ScanConfig {
  std::string experiment;  ///< empty: the split source
  std::vector<double> stretches;  ///< empty: the stretch program of the source dataset
  int substeps = 100;
};

/// Everything a command needs. Paths are taken relative to the working directory.
struct RunConfig {
  std::filesystem::path output_dir = ".";
  std::optional<std::filesystem::path> data_dir;  ///< where experiment files are read; defaults to output_dir
  KinematicMode mode = KinematicMode::PlaneStrain;
  std::vector<ExperimentFiles> experiments;  ///< empty: "<name>.mesh.json" / "<name>.dataset.json" per generated program
  std::string split_source = "strip";
  SplitConfig split;
  OptimConfig optim;
  LossSetup loss;
  ModelInit init;
  std::vector<IcnnArch> sweep_archs = default_sweep_architectures();
  std::optional<std::filesystem::path> model_in;
  std::string model_out = "model.json";
  std::optional<std::filesystem::path> predict_input;
  GenerateConfig generate;
  ScanConfig scan;
};

/// Fills `cfg` from a JSON document. Unknown keys are rejected.
void apply_json(RunConfig& cfg, const nlohmann::json& doc);

Geometry parse_geometry(const nlohmann::json& doc);
nlohmann::json geometry_json(const Geometry& geometry);
GroundTruthMaterial parse_material(const nlohmann::json& doc);
nlohmann::json material_json(const GroundTruthMaterial& material);

std::vector<ExperimentFiles> experiment_files(const RunConfig& cfg);

}  // namespace hyperfit::cli
