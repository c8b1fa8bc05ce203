#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "curvlens/error.hpp"

namespace curvlens::cli {

/// Bad or missing flags detected after parsing; maps to exit code 2.
class UsageError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class Format { json, csv };

struct Context {
  std::uint64_t seed = 0;
  std::string out;  ///< path stem
  std::optional<Format> format;
  std::map<std::string, std::string> flags;
  std::ostream* log = nullptr;
};

struct DatasetOptions {
  std::string spec_file;
  std::size_t n_samples = 1000;
  std::size_t d_in = 20;
  std::size_t n_classes = 10;
  double separation = 3.0;
  std::size_t n_test = 0;
  double input_offset = 0.0;
};

struct ModelOptions {
  std::string checkpoint;
  std::string kind = "logistic";
  std::vector<std::size_t> hidden;
  double weight_decay = 0.01;
};

struct RmtOptions {
  std::string ensemble;
  std::size_t dim = 1000;
  double ratio = 2.0;
  std::string spec_file;
  std::size_t steps = 30;
  std::size_t seeds = 1;
  std::string probe = "gaussian";
  std::size_t bins = 100;
  double gap = 0.1;
};

struct SpectrumOptions {
  DatasetOptions data;
  ModelOptions model;
  std::string curvature = "ggn";
  std::size_t steps = 30;
  std::size_t seeds = 1;
  std::string probe = "rademacher";
  std::size_t batch = 0;
  std::optional<std::size_t> layers;
  double gap = 0.1;
  bool keep_vectors = false;
};

struct CompareDiagOptions {
  std::string source = "wigner";
  std::size_t dim = 500;
  std::string spec_file;
  std::vector<double> values;
  std::size_t steps = 30;
  std::string probe = "gaussian";
};

struct TrainOptions {
  DatasetOptions data;
  ModelOptions model;
  std::string variant = "ssgd";
  std::size_t steps = 2000;
  std::size_t batch = 128;
  std::size_t lanczos_steps = 30;
  std::size_t refresh = 100;
  std::size_t curvature_batch = 0;
  std::string curvature = "ggn";
  std::string bulk_seed = "random";
  std::optional<std::size_t> layers;
  double alpha = 0.01;
  double beta = 0.9;
};

struct LandscapeOptions {
  DatasetOptions data;
  std::string checkpoint;
  std::string spectrum;
  double dist = 0.25;
  std::size_t points = 21;
  std::size_t directions = 6;
};

struct BoundsOptions {
  std::vector<double> gaps{1.5, 1.1, 1.01};
  std::vector<std::size_t> steps{5, 10, 15, 20};
};

void cmd_rmt(const Context& ctx, const RmtOptions& o);
void cmd_spectrum(const Context& ctx, const SpectrumOptions& o);
void cmd_compare_diag(const Context& ctx, const CompareDiagOptions& o);
void cmd_train(const Context& ctx, const TrainOptions& o);
void cmd_landscape(const Context& ctx, const LandscapeOptions& o);
void cmd_bounds_table(const Context& ctx, const BoundsOptions& o);

}  // namespace curvlens::cli
