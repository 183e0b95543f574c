#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bscch/config.hpp"

namespace bscch {

inline constexpr const char* kVersion = "0.1.0";

struct CertifyRow {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity
  double tolerance = 0.0;  // threshold it is compared against
  std::string detail;
};

/// Property checks of every module on the configured problem (short horizons).
std::vector<CertifyRow> certify(const RunConfig& cfg);

/// Runs cfg.experiment and writes into out_dir:
///   config.json, manifest.json, summary.json, timeseries.csv (trajectory experiments),
///   checkpoints/*.ckpt, certify.csv (certify).
/// On failure writes error.json {kind, message}. Returns 0 on success, 1 for config errors,
/// 2 for numerical failures and 3 for failed certification rows.
int run_experiment(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Legacy VTK unstructured grid of the configured mesh.
void export_mesh(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace bscch
