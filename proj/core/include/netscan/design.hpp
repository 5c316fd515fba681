#pragma once

// Block-design bookkeeping: prompt sets, Off/On block schedules, the per-token
// boxcar regressor and the five-run, seven-experiment plan.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netscan/trace.hpp"

namespace netscan {

enum class Condition : std::uint8_t { Off = 0, On = 1 };

std::string_view to_string(Condition c) noexcept;
Condition condition_from_string(std::string_view label);

struct PromptSet {
  std::string name;
  std::vector<std::string> prompts;

  void validate() const;
};

PromptSet load_prompt_set(const std::filesystem::path& path);
void save_prompt_set(const std::filesystem::path& path, const PromptSet& set);

struct Block {
  Condition condition = Condition::Off;
  std::string prompt;
};

// Off, On, Off, ..., On, Off.
struct BlockSchedule {
  std::string experiment_id;
  std::vector<Block> blocks;
  // Set when the run's prompt slice ran past the end of a set and wrapped.
  bool wrapped = false;

  std::size_t n_on_blocks() const noexcept { return blocks.size() / 2; }
  void validate() const;
};

// Takes one prompt per block, sequentially and without reuse. Run r starts
// its slice at r * (blocks needed) so runs see disjoint prompts while the set
// is large enough; past that the slice wraps and `wrapped` is set.
BlockSchedule build_block_schedule(const PromptSet& off_set, const PromptSet& on_set,
                                   std::size_t n_on_blocks, std::size_t run_index = 0);

struct Regressor {
  std::vector<std::uint8_t> x;
  std::vector<std::uint32_t> block_id;
  std::size_t n_on_tokens = 0;
  std::size_t n_off_tokens = 0;

  std::size_t size() const noexcept { return x.size(); }
  bool fittable() const noexcept { return n_on_tokens > 0 && n_off_tokens > 0; }
};

// tokens_per_block[i] is the number of tokens actually captured for block i.
Regressor expand_regressor(const BlockSchedule& schedule,
                           std::span<const std::uint32_t> tokens_per_block);

// Boxcar for an n_on_blocks design with a fixed token count per block, no
// prompts attached.
Regressor block_regressor(std::size_t n_on_blocks, std::uint32_t tokens_per_block);

DesignSidecar make_design_sidecar(const Regressor& regressor, std::string experiment_id,
                                  std::uint32_t run_id);
Regressor regressor_from_design(const DesignSidecar& design);

inline constexpr std::size_t kDefaultWordsPerPrompt = 8;

// Pure function of its arguments: words sampled with replacement, joined by
// single spaces.
PromptSet random_word_prompts(std::span<const std::string> wordlist, std::size_t n_prompts,
                              std::size_t words_per_prompt, std::uint64_t seed);

// One word per line; blank lines and surrounding whitespace are dropped.
std::vector<std::string> load_wordlist(const std::filesystem::path& path);

struct PlannedExperiment {
  std::string experiment_id;
  std::string on_set_name;
  std::string off_set_name;

  bool operator==(const PlannedExperiment&) const = default;
};

struct ExperimentPlan {
  std::uint32_t runs = 0;
  std::vector<PlannedExperiment> experiments;

  void validate() const;
  bool operator==(const ExperimentPlan&) const = default;
};

// Five runs of seven experiments: five topic sets against chat-generated
// random prompt sets 1-5, random words against random set 6, and random set 1
// against random set 2.
ExperimentPlan reference_plan();

std::string plan_to_json(const ExperimentPlan& plan);
ExperimentPlan load_plan(const std::filesystem::path& path);
void save_plan(const std::filesystem::path& path, const ExperimentPlan& plan);

}  // namespace netscan
