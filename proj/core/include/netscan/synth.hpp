#pragma once

// Synthetic traces with planted functional networks, used as ground truth
// for the detection pipeline.
//
// Element e at token t of run r for task k:
//   y = b0(e) + effect_k * x(t) * [e in planted_k] + sigma * eps(e, t)
// b0(e) ~ Uniform(baseline range) is shared by every run and task; eps is
// standard normal (optionally AR(1) over tokens). Every draw comes from a
// Philox block keyed by the seed and indexed by (element, token, stream), so
// output does not depend on generation order or thread count.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netscan/design.hpp"
#include "netscan/networks.hpp"
#include "netscan/trace.hpp"

namespace netscan {

struct PlantedTask {
  std::string task_id;
  std::vector<ElementIndex> planted;  // sorted, unique
  double effect_size = 0.0;

  bool operator==(const PlantedTask&) const = default;
};

struct SynthSpec {
  std::uint64_t n_elements = 0;
  std::vector<PlantedTask> tasks;
  double baseline_lo = 0.0;
  double baseline_hi = 1.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  // AR(1) coefficient of the noise; 0 gives iid noise.
  double ar1 = 0.0;
  // Number of runs the `synth` command writes.
  std::uint32_t runs = 1;
  std::string model_id = "synthetic";

  void validate() const;
  std::size_t task_index(std::string_view task_id) const;
  bool operator==(const SynthSpec&) const = default;
};

using TaskSizes = std::map<std::string, std::uint64_t>;
using PairOverlaps = std::map<std::pair<std::string, std::string>, std::uint64_t>;

// Draws element sets of the requested sizes such that each listed pair
// shares exactly the requested count and unlisted pairs share nothing. No
// element is shared by three or more tasks. Throws when a task's overlaps
// exceed its size or the total exceeds n_elements.
std::map<std::string, std::vector<ElementIndex>> plant_networks(std::uint64_t n_elements,
                                                                const TaskSizes& sizes,
                                                                const PairOverlaps& overlaps,
                                                                std::uint64_t seed);

// Frame-by-frame generator for one (task, run). Frames must be requested in
// token order when ar1 != 0.
class TraceGenerator {
 public:
  TraceGenerator(const SynthSpec& spec, const Regressor& regressor, std::string_view task_id,
                 std::uint32_t run_id = 0, std::size_t threads = 1);

  std::uint64_t n_tokens() const noexcept { return x_.size(); }
  std::uint64_t n_elements() const noexcept { return baseline_.size(); }
  void frame(std::uint64_t token, std::span<float> out);

 private:
  std::vector<double> baseline_;
  std::vector<double> effect_;  // per element, zero outside the planted set
  std::vector<std::uint8_t> x_;
  std::vector<double> ar_state_;
  double sigma_;
  double ar1_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t next_token_ = 0;
  std::size_t threads_;
};

TraceHeader synth_header(const SynthSpec& spec, std::string_view task_id, std::uint32_t run_id);

ActivationTrace generate_trace(const SynthSpec& spec, const Regressor& regressor,
                               std::string_view task_id, std::uint32_t run_id = 0,
                               std::size_t threads = 1);

// Streams a synthetic trace to disk with its manifest and design sidecars.
void write_synthetic_trace(const std::filesystem::path& path, const SynthSpec& spec,
                           const Regressor& regressor, std::string_view task_id,
                           std::uint32_t run_id = 0, std::size_t threads = 1);

struct DetectionScore {
  // 1 with sensitivity_defined = false when nothing was planted.
  double sensitivity = 0.0;
  bool sensitivity_defined = true;
  std::uint64_t true_positive_count = 0;
  std::uint64_t false_positive_count = 0;
  double false_positive_rate = 0.0;
};

DetectionScore evaluate_detection(const ActiveSet& active, std::span<const ElementIndex> planted,
                                  std::uint64_t n_elements);

// JSON form: {n_elements, seed, noise_sigma, baseline_range: [lo, hi], ar1,
// runs, model_id, tasks: [{task_id, effect_size, planted: [...]}]}. Tasks may
// instead be planted on load from {plant: {sizes: {...}, overlaps: [[a, b, n],
// ...]}} plus per-task effect sizes. `seed_override` replaces the file's seed
// before any planting happens.
SynthSpec load_synth_spec(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt);
void save_synth_spec(const std::filesystem::path& path, const SynthSpec& spec);

}  // namespace netscan
