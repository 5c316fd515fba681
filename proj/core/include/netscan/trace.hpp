#pragma once

// Activation traces: one dense float32 frame per generated token.
//
// Binary layout (little-endian):
//   [0, 4)     magic "ACTR"
//   [4, 8)     version, u32 (= 1)
//   [8, 16)    n_elements, u64
//   [16, 24)   n_tokens, u64 (0 while a writer is still open)
//   [24, 88)   model_id, zero-padded UTF-8
//   [88, 152)  experiment_id, zero-padded UTF-8
//   [152, 156) run_id, u32
//   [156, ...) n_tokens frames of n_elements f32 values
//
// The element manifest and the design sidecar live next to the binary file
// as `<stem>.manifest.json` and `<stem>.design.json`.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace netscan {

inline constexpr std::array<char, 4> kTraceMagic{'A', 'C', 'T', 'R'};
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::size_t kTraceHeaderSize = 156;
inline constexpr std::size_t kTraceIdFieldSize = 64;

struct TraceHeader {
  std::uint32_t version = kTraceVersion;
  std::uint64_t n_elements = 0;
  std::uint64_t n_tokens = 0;
  std::string model_id;
  std::string experiment_id;
  std::uint32_t run_id = 0;

  std::uint64_t frame_bytes() const noexcept { return n_elements * sizeof(float); }
  bool operator==(const TraceHeader&) const = default;
};

std::array<std::byte, kTraceHeaderSize> encode_header(const TraceHeader& header);
TraceHeader decode_header(std::span<const std::byte, kTraceHeaderSize> bytes);

struct ManifestEntry {
  std::string module_path;
  std::uint64_t unit_count = 0;
  std::uint64_t element_offset = 0;

  bool operator==(const ManifestEntry&) const = default;
};

// Maps flat element indices back to named model locations.
struct Manifest {
  std::vector<ManifestEntry> entries;

  // Single entry covering every element; used for synthetic traces.
  static Manifest flat(std::string module_path, std::uint64_t n_elements);

  std::uint64_t total_units() const noexcept;

  // Throws unless offsets are contiguous from 0, paths are unique, unit
  // counts are positive and the total equals n_elements.
  void validate(std::uint64_t n_elements) const;

  // Entry index owning `element`; throws if out of range.
  std::size_t locate(std::uint64_t element) const;

  bool operator==(const Manifest&) const = default;
};

// Block regressor aligned token-by-token with a trace.
struct DesignSidecar {
  std::vector<std::uint8_t> per_token_regressor;
  std::vector<std::uint32_t> per_token_block_id;
  std::vector<std::string> block_conditions;
  std::string experiment_id;
  std::uint32_t run_id = 0;

  void validate(std::uint64_t n_tokens) const;
  bool operator==(const DesignSidecar&) const = default;
};

std::filesystem::path manifest_path_for(const std::filesystem::path& trace_path);
std::filesystem::path design_path_for(const std::filesystem::path& trace_path);

void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);
void save_design(const std::filesystem::path& path, const DesignSidecar& design);
DesignSidecar load_design(const std::filesystem::path& path);

// Single-owner sequential writer. n_tokens is patched into the header on
// close(); the destructor closes if the caller did not.
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& path, TraceHeader header, const Manifest& manifest);
  ~TraceWriter();

  TraceWriter(TraceWriter&& other) noexcept;
  TraceWriter& operator=(TraceWriter&& other) noexcept;
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  // Rejects frames of the wrong width and frames holding NaN or infinity.
  void append(std::span<const float> frame);
  void close();

  std::uint64_t n_tokens() const noexcept { return header_.n_tokens; }
  const TraceHeader& header() const noexcept { return header_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  TraceHeader header_;
  std::ofstream out_;
  std::vector<std::byte> scratch_;
  bool open_ = false;
};

TraceWriter create_writer(const std::filesystem::path& path, TraceHeader header,
                          const Manifest& manifest);

// Immutable after construction. Every read opens its own stream, so one
// reader may be shared across threads.
class TraceReader {
 public:
  explicit TraceReader(std::filesystem::path path);

  const TraceHeader& header() const noexcept { return header_; }
  std::uint64_t n_elements() const noexcept { return header_.n_elements; }
  std::uint64_t n_tokens() const noexcept { return header_.n_tokens; }
  const std::filesystem::path& path() const noexcept { return path_; }

  // True when the header still said 0 tokens and the count was taken from
  // the file length (writer never closed).
  bool token_count_recovered() const noexcept { return recovered_; }

  using FrameVisitor = std::function<void(std::uint64_t token, std::span<const float> frame)>;
  void stream_frames(const FrameVisitor& visitor) const;

  // Streams consecutive runs of up to `max_frames` frames as one contiguous
  // token-major block of n_frames * n_elements values.
  using BatchVisitor = std::function<void(std::uint64_t first_token, std::uint64_t n_frames,
                                          std::span<const float> values)>;
  void stream_batches(std::uint64_t max_frames, const BatchVisitor& visitor) const;

  std::vector<float> read_element_series(std::uint64_t element) const;

 private:
  void require_complete() const;
  std::ifstream open_stream() const;

  std::filesystem::path path_;
  TraceHeader header_;
  std::uint64_t payload_bytes_ = 0;
  bool recovered_ = false;
};

// Fully materialized trace; convenient for tests and small synthetic data.
struct ActivationTrace {
  TraceHeader header;
  Manifest manifest;
  std::vector<float> values;  // token-major, n_tokens * n_elements

  std::span<const float> frame(std::uint64_t token) const;
  std::vector<float> element_series(std::uint64_t element) const;
};

void write_trace(const std::filesystem::path& path, const ActivationTrace& trace);
// Loads the binary payload plus the manifest sidecar when one exists.
ActivationTrace read_trace(const std::filesystem::path& path);

}  // namespace netscan
