#include "netscan/design.hpp"

#include <fstream>
#include <iostream>
#include <set>

#include "json_util.hpp"
#include "netscan/error.hpp"
#include "netscan/random.hpp"

namespace netscan {

std::string_view to_string(Condition c) noexcept { return c == Condition::On ? "on" : "off"; }

Condition condition_from_string(std::string_view label) {
  if (label == "on") return Condition::On;
  if (label == "off") return Condition::Off;
  throw Error("unknown block condition '" + std::string(label) + "'");
}

void PromptSet::validate() const {
  if (prompts.empty()) throw Error("prompt set '" + name + "' is empty");
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (prompts[i].empty()) {
      throw Error("prompt set '" + name + "' has an empty prompt at index " + std::to_string(i));
    }
  }
}

PromptSet load_prompt_set(const std::filesystem::path& path) {
  const auto json = detail::read_json_file(path);
  PromptSet set{detail::required<std::string>(json, "name", path),
                detail::required<std::vector<std::string>>(json, "prompts", path)};
  set.validate();
  return set;
}

void save_prompt_set(const std::filesystem::path& path, const PromptSet& set) {
  detail::write_json_file(path, detail::Json{{"name", set.name}, {"prompts", set.prompts}});
}

void BlockSchedule::validate() const {
  if (blocks.size() < 3 || blocks.size() % 2 == 0) {
    throw Error("block schedule must have an odd number (>= 3) of blocks");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Condition expected = i % 2 == 0 ? Condition::Off : Condition::On;
    if (blocks[i].condition != expected) {
      throw Error("block " + std::to_string(i) + " breaks the Off/On alternation");
    }
  }
}

BlockSchedule build_block_schedule(const PromptSet& off_set, const PromptSet& on_set,
                                   std::size_t n_on_blocks, std::size_t run_index) {
  if (n_on_blocks == 0) throw Error("a block schedule needs at least one On block");
  off_set.validate();
  on_set.validate();
  const std::size_t n_off_blocks = n_on_blocks + 1;
  if (off_set.prompts.size() < n_off_blocks) {
    throw Error("off set '" + off_set.name + "' has " + std::to_string(off_set.prompts.size()) +
                " prompts, need " + std::to_string(n_off_blocks));
  }
  if (on_set.prompts.size() < n_on_blocks) {
    throw Error("on set '" + on_set.name + "' has " + std::to_string(on_set.prompts.size()) +
                " prompts, need " + std::to_string(n_on_blocks));
  }

  BlockSchedule schedule;
  schedule.experiment_id = on_set.name + "_vs_" + off_set.name;
  const std::size_t off_start = run_index * n_off_blocks;
  const std::size_t on_start = run_index * n_on_blocks;
  schedule.wrapped = off_start + n_off_blocks > off_set.prompts.size() ||
                     on_start + n_on_blocks > on_set.prompts.size();
  if (schedule.wrapped) {
    std::cerr << "warning: run " << run_index << " of " << schedule.experiment_id
              << " wraps around its prompt sets; prompts repeat across runs\n";
  }

  std::size_t off_used = 0, on_used = 0;
  for (std::size_t i = 0; i < 2 * n_on_blocks + 1; ++i) {
    if (i % 2 == 0) {
      const auto& p = off_set.prompts[(off_start + off_used++) % off_set.prompts.size()];
      schedule.blocks.push_back({Condition::Off, p});
    } else {
      const auto& p = on_set.prompts[(on_start + on_used++) % on_set.prompts.size()];
      schedule.blocks.push_back({Condition::On, p});
    }
  }
  return schedule;
}

Regressor expand_regressor(const BlockSchedule& schedule,
                           std::span<const std::uint32_t> tokens_per_block) {
  if (tokens_per_block.size() != schedule.blocks.size()) {
    throw Error("got token counts for " + std::to_string(tokens_per_block.size()) +
                " blocks, schedule has " + std::to_string(schedule.blocks.size()));
  }
  Regressor r;
  for (std::size_t b = 0; b < schedule.blocks.size(); ++b) {
    const std::uint32_t count = tokens_per_block[b];
    if (count == 0) throw Error("block " + std::to_string(b) + " produced zero tokens");
    const auto value = static_cast<std::uint8_t>(schedule.blocks[b].condition);
    r.x.insert(r.x.end(), count, value);
    r.block_id.insert(r.block_id.end(), count, static_cast<std::uint32_t>(b));
    (value == 1 ? r.n_on_tokens : r.n_off_tokens) += count;
  }
  return r;
}

Regressor block_regressor(std::size_t n_on_blocks, std::uint32_t tokens_per_block) {
  BlockSchedule schedule;
  for (std::size_t i = 0; i < 2 * n_on_blocks + 1; ++i) {
    schedule.blocks.push_back({i % 2 == 0 ? Condition::Off : Condition::On, {}});
  }
  const std::vector<std::uint32_t> counts(schedule.blocks.size(), tokens_per_block);
  return expand_regressor(schedule, counts);
}

DesignSidecar make_design_sidecar(const Regressor& regressor, std::string experiment_id,
                                  std::uint32_t run_id) {
  DesignSidecar design;
  design.per_token_regressor = regressor.x;
  design.per_token_block_id = regressor.block_id;
  std::uint32_t n_blocks = 0;
  for (std::size_t t = 0; t < regressor.size(); ++t) {
    if (regressor.block_id[t] >= n_blocks) {
      n_blocks = regressor.block_id[t] + 1;
      design.block_conditions.resize(n_blocks);
    }
    design.block_conditions[regressor.block_id[t]] =
        std::string(to_string(static_cast<Condition>(regressor.x[t])));
  }
  design.experiment_id = std::move(experiment_id);
  design.run_id = run_id;
  return design;
}

Regressor regressor_from_design(const DesignSidecar& design) {
  design.validate(design.per_token_regressor.size());
  Regressor r;
  r.x = design.per_token_regressor;
  r.block_id = design.per_token_block_id;
  for (auto v : r.x) (v == 1 ? r.n_on_tokens : r.n_off_tokens) += 1;
  return r;
}

PromptSet random_word_prompts(std::span<const std::string> wordlist, std::size_t n_prompts,
                              std::size_t words_per_prompt, std::uint64_t seed) {
  if (wordlist.empty()) throw Error("random_word_prompts: empty wordlist");
  if (words_per_prompt == 0) throw Error("random_word_prompts: words_per_prompt must be >= 1");
  CounterStream rng(seed, 0x776f726473ull);  // "words"
  PromptSet set;
  set.name = "random_words";
  set.prompts.reserve(n_prompts);
  for (std::size_t i = 0; i < n_prompts; ++i) {
    std::string prompt;
    for (std::size_t w = 0; w < words_per_prompt; ++w) {
      if (w > 0) prompt += ' ';
      prompt += wordlist[rng.below(wordlist.size())];
    }
    set.prompts.push_back(std::move(prompt));
  }
  return set;
}

std::vector<std::string> load_wordlist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open wordlist " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    words.push_back(line.substr(first, last - first + 1));
  }
  if (words.empty()) throw Error("wordlist " + path.string() + " is empty");
  return words;
}

void ExperimentPlan::validate() const {
  if (runs == 0) throw Error("experiment plan needs at least one run");
  std::set<std::string_view> ids;
  for (const auto& e : experiments) {
    if (e.experiment_id.empty()) throw Error("experiment plan has an empty experiment_id");
    if (!ids.insert(e.experiment_id).second) {
      throw Error("duplicate experiment_id '" + e.experiment_id + "' in plan");
    }
  }
}

ExperimentPlan reference_plan() {
  return ExperimentPlan{
      5,
      {
          {"pol_sci", "political_science", "gpt_random_1"},
          {"med_img", "medical_imaging", "gpt_random_2"},
          {"paleo", "paleontology", "gpt_random_3"},
          {"arch", "archeology", "gpt_random_4"},
          {"path", "pathology", "gpt_random_5"},
          {"full_rand", "random_words", "gpt_random_6"},
          {"gpt_rand", "gpt_random_1", "gpt_random_2"},
      }};
}

namespace {

detail::Json plan_json(const ExperimentPlan& plan) {
  detail::Json experiments = detail::Json::array();
  for (const auto& e : plan.experiments) {
    experiments.push_back({{"experiment_id", e.experiment_id},
                           {"on_set_name", e.on_set_name},
                           {"off_set_name", e.off_set_name}});
  }
  return {{"runs", plan.runs}, {"experiments", std::move(experiments)}};
}

}  // namespace

std::string plan_to_json(const ExperimentPlan& plan) { return plan_json(plan).dump(2) + "\n"; }

void save_plan(const std::filesystem::path& path, const ExperimentPlan& plan) {
  detail::write_json_file(path, plan_json(plan));
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  const auto json = detail::read_json_file(path);
  ExperimentPlan plan;
  plan.runs = detail::required<std::uint32_t>(json, "runs", path);
  for (const auto& e : detail::required<detail::Json>(json, "experiments", path)) {
    plan.experiments.push_back({detail::required<std::string>(e, "experiment_id", path),
                                detail::required<std::string>(e, "on_set_name", path),
                                detail::required<std::string>(e, "off_set_name", path)});
  }
  plan.validate();
  return plan;
}

}  // namespace netscan
