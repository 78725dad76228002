#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trajmap/ckptstore.hpp"
#include "trajmap/hallmarks.hpp"

namespace trajmap {

/// Two Gaussian classes at +-separation/2 along the unit diagonal.
struct BlobSpec {
  std::size_t samples_per_class = 256;
  std::size_t dim = 20;
  double separation = 3.0;
  double noise_std = 1.0;
  std::uint64_t seed = 1;
};

enum class LossKind { CrossEntropy, Squared };

struct TrainSpec {
  std::vector<std::size_t> layer_sizes = {20, 64, 64, 2};
  BlobSpec data;
  double eta = 0.05;
  std::vector<std::pair<std::size_t, double>> eta_schedule;  // (epoch, multiplier) from that epoch on
  double mu = 0.9;
  double wd = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::size_t ckpt_every = 1;
  std::uint64_t seed = 7;
  LossKind loss = LossKind::CrossEntropy;

  void validate() const;
  double learning_rate(std::size_t epoch) const;  // epoch is 0-based
};

/// The desk-scale configuration used by the tests and the acceptance suite.
TrainSpec fixture_spec();

struct EpochStats {
  std::size_t epoch = 0;  // 0 is the initialization
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainRunRecord {
  std::vector<EpochStats> epochs;
  std::filesystem::path manifest_path;
  double wall_seconds = 0.0;
};

struct Dataset {
  std::size_t dim = 0;
  std::vector<double> x;  // row-major, samples x dim
  std::vector<std::size_t> labels;
  std::size_t size() const noexcept { return labels.size(); }
};

Dataset make_blobs(const BlobSpec& spec);

/// Initial parameters as named tensors: layers.<i>.weight (out x in), layers.<i>.bias.
Checkpoint init_parameters(const TrainSpec& spec);

/// Trains and writes manifest.json, ckpt_*.bin and run.json into out_dir. Throws NonFiniteLoss or IoError.
TrainRunRecord train(const TrainSpec& spec, const std::filesystem::path& out_dir);

struct GridVariant {
  std::string name;  // empty: derived from mu and wd
  double mu = 0.0;
  double wd = 0.0;
};

struct GridResult {
  std::string name;
  double mu = 0.0;
  double wd = 0.0;
  MdsResult omega;
  TrainRunRecord run;
};

std::string variant_label(double mu, double wd);

/// Trains each variant into out_dir/<index>_<name> and reports its MDS, in input order.
std::vector<GridResult> hyperparameter_grid(const TrainSpec& base, std::span<const GridVariant> variants,
                                            const std::filesystem::path& out_dir);

/// The momentum / weight-decay ablation grid: both on, each off, both off.
std::vector<GridVariant> ablation_variants(double mu, double wd);

TrainSpec train_spec_from_json(std::string_view text);
std::string train_spec_to_json(const TrainSpec& spec);
void write_run_record(const TrainRunRecord& record, const std::filesystem::path& path);

}  // namespace trajmap
