#include "netscan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "json_util.hpp"
#include "netscan/error.hpp"
#include "netscan/parallel.hpp"
#include "netscan/random.hpp"

namespace netscan {

namespace {

constexpr std::uint64_t kPlantStream = 0x706c616e74ull;  // "plant"

Philox4x32::Counter draw_counter(std::uint64_t element, std::uint64_t token,
                                 std::uint64_t stream) {
  return {static_cast<std::uint32_t>(element), static_cast<std::uint32_t>(token),
          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

// Stream 0 holds the per-element baselines; (task, run) noise streams are
// offset so they never coincide with it.
std::uint64_t noise_stream(std::size_t task_index, std::uint32_t run_id) {
  return ((static_cast<std::uint64_t>(run_id) + 1) << 32) | (task_index + 1);
}

}  // namespace

void SynthSpec::validate() const {
  if (n_elements == 0) throw Error("synth spec: n_elements must be positive");
  if (n_elements > std::numeric_limits<std::uint32_t>::max()) {
    throw Error("synth spec: n_elements must fit in 32 bits");
  }
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw Error("synth spec: noise_sigma must be positive");
  }
  if (!(baseline_lo <= baseline_hi) || !std::isfinite(baseline_lo) ||
      !std::isfinite(baseline_hi)) {
    throw Error("synth spec: baseline range must be a finite interval");
  }
  if (!(ar1 > -1.0 && ar1 < 1.0)) throw Error("synth spec: ar1 must lie in (-1, 1)");
  if (runs == 0) throw Error("synth spec: runs must be >= 1");
  std::set<std::string_view> ids;
  for (const auto& task : tasks) {
    if (task.task_id.empty()) throw Error("synth spec: empty task_id");
    if (!ids.insert(task.task_id).second) {
      throw Error("synth spec: duplicate task_id '" + task.task_id + "'");
    }
    if (!(task.effect_size >= 0.0) || !std::isfinite(task.effect_size)) {
      throw Error("synth spec: task '" + task.task_id + "' needs a finite effect_size >= 0");
    }
    for (std::size_t i = 0; i < task.planted.size(); ++i) {
      if (task.planted[i] >= n_elements) {
        throw Error("synth spec: task '" + task.task_id + "' plants element " +
                    std::to_string(task.planted[i]) + " beyond n_elements");
      }
      if (i > 0 && task.planted[i] <= task.planted[i - 1]) {
        throw Error("synth spec: task '" + task.task_id + "' planted set is not sorted/unique");
      }
    }
  }
}

std::size_t SynthSpec::task_index(std::string_view task_id) const {
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].task_id == task_id) return i;
  }
  throw Error("unknown task '" + std::string(task_id) + "'");
}

std::map<std::string, std::vector<ElementIndex>> plant_networks(std::uint64_t n_elements,
                                                                const TaskSizes& sizes,
                                                                const PairOverlaps& overlaps,
                                                                std::uint64_t seed) {
  std::map<std::string, std::uint64_t> shared;
  std::set<std::pair<std::string, std::string>> seen_pairs;
  std::uint64_t total = 0;
  for (const auto& [pair, count] : overlaps) {
    const auto& [a, b] = pair;
    if (a == b) throw Error("overlap pair repeats task '" + a + "'");
    if (!sizes.contains(a) || !sizes.contains(b)) {
      throw Error("overlap names unknown task pair (" + a + ", " + b + ")");
    }
    if (!seen_pairs.insert(std::minmax(a, b)).second) {
      throw Error("overlap for (" + a + ", " + b + ") given twice");
    }
    shared[a] += count;
    shared[b] += count;
    total += count;
  }
  for (const auto& [task, size] : sizes) {
    if (shared[task] > size) {
      throw Error("infeasible plant: task '" + task + "' is asked to share " +
                  std::to_string(shared[task]) + " elements but has only " +
                  std::to_string(size));
    }
    total += size - shared[task];
  }
  if (total > n_elements) {
    throw Error("infeasible plant: needs " + std::to_string(total) + " distinct elements, have " +
                std::to_string(n_elements));
  }

  // Partial Fisher-Yates: the first `total` slots become a uniform sample.
  std::vector<ElementIndex> pool(n_elements);
  std::iota(pool.begin(), pool.end(), ElementIndex{0});
  CounterStream rng(seed, kPlantStream);
  for (std::uint64_t i = 0; i < total; ++i) {
    std::swap(pool[i], pool[i + rng.below(n_elements - i)]);
  }

  std::map<std::string, std::vector<ElementIndex>> planted;
  for (const auto& [task, size] : sizes) planted[task].reserve(size);
  std::uint64_t next = 0;
  for (const auto& [pair, count] : overlaps) {
    for (std::uint64_t i = 0; i < count; ++i, ++next) {
      planted[pair.first].push_back(pool[next]);
      planted[pair.second].push_back(pool[next]);
    }
  }
  for (const auto& [task, size] : sizes) {
    for (std::uint64_t i = shared[task]; i < size; ++i) planted[task].push_back(pool[next++]);
    std::sort(planted[task].begin(), planted[task].end());
  }
  return planted;
}

// ---------------------------------------------------------------------------

TraceGenerator::TraceGenerator(const SynthSpec& spec, const Regressor& regressor,
                               std::string_view task_id, std::uint32_t run_id,
                               std::size_t threads)
    : baseline_(spec.n_elements),
      effect_(spec.n_elements, 0.0),
      x_(regressor.x),
      sigma_(spec.noise_sigma),
      ar1_(spec.ar1),
      seed_(spec.seed),
      threads_(resolve_threads(threads)) {
  spec.validate();
  const std::size_t task = spec.task_index(task_id);
  for (auto v : x_) {
    if (v > 1) throw Error("regressor values must be 0 or 1");
  }
  stream_ = noise_stream(task, run_id);

  const auto key = Philox4x32::key_from_seed(seed_);
  const double span = spec.baseline_hi - spec.baseline_lo;
  for (std::uint64_t e = 0; e < spec.n_elements; ++e) {
    const auto block = Philox4x32::generate(draw_counter(e, 0, 0), key);
    baseline_[e] = spec.baseline_lo + span * uniform_closed0(block[0], block[1]);
  }
  for (ElementIndex e : spec.tasks[task].planted) effect_[e] = spec.tasks[task].effect_size;
  if (ar1_ != 0.0) ar_state_.assign(spec.n_elements, 0.0);
}

void TraceGenerator::frame(std::uint64_t token, std::span<float> out) {
  if (token >= x_.size()) throw Error("token " + std::to_string(token) + " beyond regressor");
  if (out.size() != baseline_.size()) throw Error("output frame has the wrong width");
  if (ar1_ != 0.0 && token != next_token_) {
    throw Error("AR(1) synthetic frames must be generated in token order");
  }
  const auto key = Philox4x32::key_from_seed(seed_);
  const double x = x_[token];
  const double innovation_scale = std::sqrt(1.0 - ar1_ * ar1_);
  parallel_for(out.size(), threads_, [&](std::size_t first, std::size_t last) {
    for (std::size_t e = first; e < last; ++e) {
      double eps = normal_from_block(Philox4x32::generate(draw_counter(e, token, stream_), key));
      if (ar1_ != 0.0) {
        eps = token == 0 ? eps : ar1_ * ar_state_[e] + innovation_scale * eps;
        ar_state_[e] = eps;
      }
      out[e] = static_cast<float>(baseline_[e] + effect_[e] * x + sigma_ * eps);
    }
  });
  next_token_ = token + 1;
}

TraceHeader synth_header(const SynthSpec& spec, std::string_view task_id, std::uint32_t run_id) {
  TraceHeader header;
  header.n_elements = spec.n_elements;
  header.model_id = spec.model_id;
  header.experiment_id = std::string(task_id);
  header.run_id = run_id;
  return header;
}

ActivationTrace generate_trace(const SynthSpec& spec, const Regressor& regressor,
                               std::string_view task_id, std::uint32_t run_id,
                               std::size_t threads) {
  TraceGenerator gen(spec, regressor, task_id, run_id, threads);
  ActivationTrace trace;
  trace.header = synth_header(spec, task_id, run_id);
  trace.header.n_tokens = gen.n_tokens();
  trace.manifest = Manifest::flat("synthetic", spec.n_elements);
  trace.values.resize(gen.n_tokens() * spec.n_elements);
  for (std::uint64_t t = 0; t < gen.n_tokens(); ++t) {
    gen.frame(t, std::span<float>(trace.values).subspan(t * spec.n_elements, spec.n_elements));
  }
  return trace;
}

void write_synthetic_trace(const std::filesystem::path& path, const SynthSpec& spec,
                           const Regressor& regressor, std::string_view task_id,
                           std::uint32_t run_id, std::size_t threads) {
  TraceGenerator gen(spec, regressor, task_id, run_id, threads);
  TraceWriter writer(path, synth_header(spec, task_id, run_id),
                     Manifest::flat("synthetic", spec.n_elements));
  std::vector<float> frame(spec.n_elements);
  for (std::uint64_t t = 0; t < gen.n_tokens(); ++t) {
    gen.frame(t, frame);
    writer.append(frame);
  }
  writer.close();
  save_design(design_path_for(path), make_design_sidecar(regressor, std::string(task_id), run_id));
}

DetectionScore evaluate_detection(const ActiveSet& active, std::span<const ElementIndex> planted,
                                  std::uint64_t n_elements) {
  std::vector<ElementIndex> truth(planted.begin(), planted.end());
  std::sort(truth.begin(), truth.end());
  truth.erase(std::unique(truth.begin(), truth.end()), truth.end());

  DetectionScore score;
  for (ElementIndex e : active.elements) {
    if (std::binary_search(truth.begin(), truth.end(), e)) {
      ++score.true_positive_count;
    } else {
      ++score.false_positive_count;
    }
  }
  if (truth.empty()) {
    score.sensitivity = 1.0;
    score.sensitivity_defined = false;
  } else {
    score.sensitivity =
        static_cast<double>(score.true_positive_count) / static_cast<double>(truth.size());
  }
  const std::uint64_t negatives = n_elements > truth.size() ? n_elements - truth.size() : 0;
  score.false_positive_rate =
      negatives == 0 ? 0.0
                     : static_cast<double>(score.false_positive_count) / static_cast<double>(negatives);
  return score;
}

// ---------------------------------------------------------------------------

SynthSpec load_synth_spec(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override) {
  using detail::Json;
  const auto json = detail::read_json_file(path);
  SynthSpec spec;
  spec.n_elements = detail::required<std::uint64_t>(json, "n_elements", path);
  spec.seed = seed_override.value_or(detail::optional_field<std::uint64_t>(json, "seed", 0, path));
  spec.noise_sigma = detail::optional_field<double>(json, "noise_sigma", 1.0, path);
  const auto range =
      detail::optional_field<std::vector<double>>(json, "baseline_range", {0.0, 1.0}, path);
  if (range.size() != 2) throw Error(path.string() + ": baseline_range must be [lo, hi]");
  spec.baseline_lo = range[0];
  spec.baseline_hi = range[1];
  spec.ar1 = detail::optional_field<double>(json, "ar1", 0.0, path);
  spec.runs = detail::optional_field<std::uint32_t>(json, "runs", 1, path);
  spec.model_id = detail::optional_field<std::string>(json, "model_id", "synthetic", path);

  if (json.contains("tasks")) {
    for (const auto& t : json.at("tasks")) {
      PlantedTask task{detail::required<std::string>(t, "task_id", path),
                       detail::optional_field<std::vector<ElementIndex>>(t, "planted", {}, path),
                       detail::required<double>(t, "effect_size", path)};
      std::sort(task.planted.begin(), task.planted.end());
      task.planted.erase(std::unique(task.planted.begin(), task.planted.end()),
                         task.planted.end());
      spec.tasks.push_back(std::move(task));
    }
  }
  if (json.contains("plant")) {
    const auto& plant = json.at("plant");
    const auto sizes = detail::required<TaskSizes>(plant, "sizes", path);
    PairOverlaps overlaps;
    for (const auto& o : detail::optional_field<Json>(plant, "overlaps", Json::array(), path)) {
      if (!o.is_array() || o.size() != 3) {
        throw Error(path.string() + ": overlaps entries must be [task_a, task_b, count]");
      }
      overlaps[{o[0].get<std::string>(), o[1].get<std::string>()}] = o[2].get<std::uint64_t>();
    }
    const auto effects =
        detail::optional_field<std::map<std::string, double>>(json, "effects", {}, path);
    const double default_effect = detail::optional_field<double>(json, "default_effect", 0.0, path);
    std::set<std::string> ids;
    for (const auto& [id, size] : sizes) ids.insert(id);
    for (const auto& [id, effect] : effects) ids.insert(id);
    TaskSizes all_sizes = sizes;
    for (const auto& id : ids) all_sizes.try_emplace(id, 0);
    auto planted = plant_networks(spec.n_elements, all_sizes, overlaps, spec.seed);
    for (const auto& id : ids) {
      const auto effect = effects.find(id);
      spec.tasks.push_back({id, std::move(planted[id]),
                            effect == effects.end() ? default_effect : effect->second});
    }
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return spec;
}

void save_synth_spec(const std::filesystem::path& path, const SynthSpec& spec) {
  using detail::Json;
  Json tasks = Json::array();
  for (const auto& t : spec.tasks) {
    tasks.push_back({{"task_id", t.task_id}, {"effect_size", t.effect_size}, {"planted", t.planted}});
  }
  detail::write_json_file(path, Json{{"n_elements", spec.n_elements},
                                     {"seed", spec.seed},
                                     {"noise_sigma", spec.noise_sigma},
                                     {"baseline_range", {spec.baseline_lo, spec.baseline_hi}},
                                     {"ar1", spec.ar1},
                                     {"runs", spec.runs},
                                     {"model_id", spec.model_id},
                                     {"tasks", std::move(tasks)}});
}

}  // namespace netscan
