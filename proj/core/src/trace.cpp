#include "netscan/trace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <utility>

#include "json_util.hpp"
#include "netscan/error.hpp"

namespace netscan {

namespace {

template <typename T>
void put_le(std::byte* dst, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    dst[i] = static_cast<std::byte>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu);
  }
}

template <typename T>
T get_le(const std::byte* src) {
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(src[i])) << (8 * i);
  }
  return static_cast<T>(value);
}

void put_id(std::byte* dst, const std::string& id, const char* name) {
  if (id.size() > kTraceIdFieldSize) {
    throw Error(std::string(name) + " longer than 64 bytes: " + id);
  }
  std::memset(dst, 0, kTraceIdFieldSize);
  std::memcpy(dst, id.data(), id.size());
}

std::string get_id(const std::byte* src) {
  const char* chars = reinterpret_cast<const char*>(src);
  return std::string(chars, strnlen(chars, kTraceIdFieldSize));
}

// f32 values are stored little-endian; hosts are almost always LE already.
void floats_to_le(std::span<const float> values, std::byte* dst) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(dst, values.data(), values.size_bytes());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      put_le(dst + 4 * i, std::bit_cast<std::uint32_t>(values[i]));
    }
  }
}

void le_to_floats(std::span<float> values) {
  if constexpr (std::endian::native != std::endian::little) {
    for (float& v : values) {
      v = std::bit_cast<float>(get_le<std::uint32_t>(reinterpret_cast<const std::byte*>(&v)));
    }
  }
}

std::filesystem::path sidecar(const std::filesystem::path& trace_path, const char* suffix) {
  std::filesystem::path p = trace_path;
  p.replace_extension();
  p += suffix;
  return p;
}

}  // namespace

std::array<std::byte, kTraceHeaderSize> encode_header(const TraceHeader& header) {
  std::array<std::byte, kTraceHeaderSize> bytes{};
  std::memcpy(bytes.data(), kTraceMagic.data(), kTraceMagic.size());
  put_le(bytes.data() + 4, header.version);
  put_le(bytes.data() + 8, header.n_elements);
  put_le(bytes.data() + 16, header.n_tokens);
  put_id(bytes.data() + 24, header.model_id, "model_id");
  put_id(bytes.data() + 88, header.experiment_id, "experiment_id");
  put_le(bytes.data() + 152, header.run_id);
  return bytes;
}

TraceHeader decode_header(std::span<const std::byte, kTraceHeaderSize> bytes) {
  if (std::memcmp(bytes.data(), kTraceMagic.data(), kTraceMagic.size()) != 0) {
    throw Error("not an activation trace (bad magic)");
  }
  TraceHeader header;
  header.version = get_le<std::uint32_t>(bytes.data() + 4);
  if (header.version != kTraceVersion) {
    throw Error("unsupported trace version " + std::to_string(header.version));
  }
  header.n_elements = get_le<std::uint64_t>(bytes.data() + 8);
  header.n_tokens = get_le<std::uint64_t>(bytes.data() + 16);
  header.model_id = get_id(bytes.data() + 24);
  header.experiment_id = get_id(bytes.data() + 88);
  header.run_id = get_le<std::uint32_t>(bytes.data() + 152);
  if (header.n_elements == 0) throw Error("trace header has n_elements = 0");
  return header;
}

// ---------------------------------------------------------------------------
// Manifest

Manifest Manifest::flat(std::string module_path, std::uint64_t n_elements) {
  return Manifest{{ManifestEntry{std::move(module_path), n_elements, 0}}};
}

std::uint64_t Manifest::total_units() const noexcept {
  std::uint64_t total = 0;
  for (const auto& e : entries) total += e.unit_count;
  return total;
}

void Manifest::validate(std::uint64_t n_elements) const {
  std::set<std::string_view> seen;
  std::uint64_t expected_offset = 0;
  for (const auto& e : entries) {
    if (!seen.insert(e.module_path).second) {
      throw Error("manifest: duplicate module_path '" + e.module_path + "'");
    }
    if (e.unit_count == 0) {
      throw Error("manifest: module '" + e.module_path + "' has zero units");
    }
    if (e.element_offset != expected_offset) {
      throw Error("manifest: module '" + e.module_path + "' starts at " +
                  std::to_string(e.element_offset) + ", expected " +
                  std::to_string(expected_offset));
    }
    expected_offset += e.unit_count;
  }
  if (expected_offset != n_elements) {
    throw Error("manifest covers " + std::to_string(expected_offset) +
                " elements but the trace has " + std::to_string(n_elements));
  }
}

std::size_t Manifest::locate(std::uint64_t element) const {
  auto it = std::upper_bound(entries.begin(), entries.end(), element,
                             [](std::uint64_t e, const ManifestEntry& entry) {
                               return e < entry.element_offset;
                             });
  if (it == entries.begin()) throw Error("element " + std::to_string(element) + " not in manifest");
  --it;
  if (element >= it->element_offset + it->unit_count) {
    throw Error("element " + std::to_string(element) + " not in manifest");
  }
  return static_cast<std::size_t>(it - entries.begin());
}

void DesignSidecar::validate(std::uint64_t n_tokens) const {
  if (per_token_regressor.size() != n_tokens || per_token_block_id.size() != n_tokens) {
    throw Error("design covers " + std::to_string(per_token_regressor.size()) +
                " tokens but the trace has " + std::to_string(n_tokens));
  }
  for (std::size_t t = 0; t < per_token_regressor.size(); ++t) {
    if (per_token_regressor[t] > 1) {
      throw Error("design regressor value at token " + std::to_string(t) + " is not 0 or 1");
    }
    if (per_token_block_id[t] >= block_conditions.size()) {
      throw Error("design block id at token " + std::to_string(t) + " has no block condition");
    }
  }
}

std::filesystem::path manifest_path_for(const std::filesystem::path& trace_path) {
  return sidecar(trace_path, ".manifest.json");
}

std::filesystem::path design_path_for(const std::filesystem::path& trace_path) {
  return sidecar(trace_path, ".design.json");
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  detail::Json entries = detail::Json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"module_path", e.module_path},
                       {"unit_count", e.unit_count},
                       {"element_offset", e.element_offset}});
  }
  detail::write_json_file(path, detail::Json{{"entries", std::move(entries)}});
}

Manifest load_manifest(const std::filesystem::path& path) {
  const auto json = detail::read_json_file(path);
  Manifest manifest;
  for (const auto& e : detail::required<detail::Json>(json, "entries", path)) {
    manifest.entries.push_back({detail::required<std::string>(e, "module_path", path),
                                detail::required<std::uint64_t>(e, "unit_count", path),
                                detail::required<std::uint64_t>(e, "element_offset", path)});
  }
  return manifest;
}

void save_design(const std::filesystem::path& path, const DesignSidecar& design) {
  detail::Json json;
  json["per_token_regressor"] = design.per_token_regressor;
  json["per_token_block_id"] = design.per_token_block_id;
  json["block_conditions"] = design.block_conditions;
  json["experiment_id"] = design.experiment_id;
  json["run_id"] = design.run_id;
  detail::write_json_file(path, json);
}

DesignSidecar load_design(const std::filesystem::path& path) {
  const auto json = detail::read_json_file(path);
  DesignSidecar design;
  design.per_token_regressor =
      detail::required<std::vector<std::uint8_t>>(json, "per_token_regressor", path);
  design.per_token_block_id =
      detail::required<std::vector<std::uint32_t>>(json, "per_token_block_id", path);
  design.block_conditions =
      detail::required<std::vector<std::string>>(json, "block_conditions", path);
  design.experiment_id = detail::optional_field<std::string>(json, "experiment_id", "", path);
  design.run_id = detail::optional_field<std::uint32_t>(json, "run_id", 0, path);
  design.validate(design.per_token_regressor.size());
  return design;
}

// ---------------------------------------------------------------------------
// Writer

TraceWriter::TraceWriter(const std::filesystem::path& path, TraceHeader header,
                         const Manifest& manifest)
    : path_(path), header_(std::move(header)) {
  if (header_.n_elements == 0) throw Error("trace must have at least one element");
  manifest.validate(header_.n_elements);
  header_.version = kTraceVersion;
  header_.n_tokens = 0;
  const auto bytes = encode_header(header_);

  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error("cannot create trace " + path_.string());
  out_.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!out_) throw Error("write failed: " + path_.string());
  save_manifest(manifest_path_for(path_), manifest);
  scratch_.resize(header_.frame_bytes());
  open_ = true;
}

TraceWriter::TraceWriter(TraceWriter&& other) noexcept
    : path_(std::move(other.path_)),
      header_(std::move(other.header_)),
      out_(std::move(other.out_)),
      scratch_(std::move(other.scratch_)),
      open_(std::exchange(other.open_, false)) {}

TraceWriter& TraceWriter::operator=(TraceWriter&& other) noexcept {
  if (this != &other) {
    if (open_) {
      try {
        close();
      } catch (...) {
      }
    }
    path_ = std::move(other.path_);
    header_ = std::move(other.header_);
    out_ = std::move(other.out_);
    scratch_ = std::move(other.scratch_);
    open_ = std::exchange(other.open_, false);
  }
  return *this;
}

TraceWriter::~TraceWriter() {
  if (!open_) return;
  try {
    close();
  } catch (...) {
  }
}

void TraceWriter::append(std::span<const float> frame) {
  if (!open_) throw Error("append on closed trace writer");
  if (frame.size() != header_.n_elements) {
    throw Error("frame has " + std::to_string(frame.size()) + " values, trace expects " +
                std::to_string(header_.n_elements));
  }
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (!std::isfinite(frame[i])) {
      throw Error("non-finite activation at element " + std::to_string(i) + " of token " +
                  std::to_string(header_.n_tokens));
    }
  }
  floats_to_le(frame, scratch_.data());
  out_.write(reinterpret_cast<const char*>(scratch_.data()),
             static_cast<std::streamsize>(scratch_.size()));
  if (!out_) throw Error("write failed: " + path_.string());
  ++header_.n_tokens;
}

void TraceWriter::close() {
  if (!open_) return;
  open_ = false;
  std::array<std::byte, 8> count{};
  put_le(count.data(), header_.n_tokens);
  out_.seekp(16);
  out_.write(reinterpret_cast<const char*>(count.data()), count.size());
  out_.close();
  if (!out_) throw Error("failed to finalize " + path_.string());
}

TraceWriter create_writer(const std::filesystem::path& path, TraceHeader header,
                          const Manifest& manifest) {
  return TraceWriter(path, std::move(header), manifest);
}

// ---------------------------------------------------------------------------
// Reader

TraceReader::TraceReader(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error("cannot open trace " + path_.string());
  std::array<std::byte, kTraceHeaderSize> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw Error(path_.string() + ": truncated header");
  }
  header_ = decode_header(bytes);

  const auto size = std::filesystem::file_size(path_);
  payload_bytes_ = size - kTraceHeaderSize;
  const std::uint64_t frame = header_.frame_bytes();
  if (header_.n_tokens == 0 && payload_bytes_ > 0) {
    // Writer never reached close(); trust whole frames on disk.
    header_.n_tokens = payload_bytes_ / frame;
    recovered_ = true;
  }
}

void TraceReader::require_complete() const {
  const std::uint64_t frame = header_.frame_bytes();
  const std::uint64_t expected = header_.n_tokens * frame;
  if (payload_bytes_ == expected) return;
  if (payload_bytes_ > expected && !recovered_) {
    throw Error(path_.string() + ": length mismatch, " +
                std::to_string(payload_bytes_ - expected) + " bytes beyond token " +
                std::to_string(header_.n_tokens));
  }
  const std::uint64_t complete = payload_bytes_ / frame;
  std::string where = complete == 0 ? std::string("no complete token")
                                    : "last complete token is " + std::to_string(complete - 1);
  throw Error(path_.string() + ": truncated after " + std::to_string(payload_bytes_) +
              " payload bytes (" + where + " of " + std::to_string(header_.n_tokens) + ")");
}

std::ifstream TraceReader::open_stream() const {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error("cannot open trace " + path_.string());
  return in;
}

void TraceReader::stream_batches(std::uint64_t max_frames, const BatchVisitor& visitor) const {
  require_complete();
  if (header_.n_tokens == 0) return;
  max_frames = std::clamp<std::uint64_t>(max_frames, 1, header_.n_tokens);
  auto in = open_stream();
  in.seekg(static_cast<std::streamoff>(kTraceHeaderSize));
  std::vector<float> buffer(max_frames * header_.n_elements);
  for (std::uint64_t first = 0; first < header_.n_tokens;) {
    const std::uint64_t count = std::min(max_frames, header_.n_tokens - first);
    const std::span<float> block(buffer.data(), count * header_.n_elements);
    in.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(block.size_bytes()));
    if (in.gcount() != static_cast<std::streamsize>(block.size_bytes())) {
      throw Error(path_.string() + ": short read at token " + std::to_string(first));
    }
    le_to_floats(block);
    visitor(first, count, block);
    first += count;
  }
}

void TraceReader::stream_frames(const FrameVisitor& visitor) const {
  const std::uint64_t width = header_.n_elements;
  const std::uint64_t per_batch = std::max<std::uint64_t>(1, (8u << 20) / header_.frame_bytes());
  stream_batches(per_batch, [&](std::uint64_t first, std::uint64_t n, std::span<const float> v) {
    for (std::uint64_t i = 0; i < n; ++i) visitor(first + i, v.subspan(i * width, width));
  });
}

std::vector<float> TraceReader::read_element_series(std::uint64_t element) const {
  if (element >= header_.n_elements) {
    throw Error("element " + std::to_string(element) + " out of range (trace has " +
                std::to_string(header_.n_elements) + " elements)");
  }
  require_complete();
  auto in = open_stream();
  std::vector<float> series(header_.n_tokens);
  for (std::uint64_t t = 0; t < header_.n_tokens; ++t) {
    in.seekg(static_cast<std::streamoff>(kTraceHeaderSize + t * header_.frame_bytes() +
                                         element * sizeof(float)));
    in.read(reinterpret_cast<char*>(&series[t]), sizeof(float));
    if (!in) throw Error(path_.string() + ": short read at token " + std::to_string(t));
  }
  le_to_floats(series);
  return series;
}

// ---------------------------------------------------------------------------
// In-memory traces

std::span<const float> ActivationTrace::frame(std::uint64_t token) const {
  if (token >= header.n_tokens) throw Error("token " + std::to_string(token) + " out of range");
  return std::span<const float>(values).subspan(token * header.n_elements, header.n_elements);
}

std::vector<float> ActivationTrace::element_series(std::uint64_t element) const {
  if (element >= header.n_elements) {
    throw Error("element " + std::to_string(element) + " out of range");
  }
  std::vector<float> series(header.n_tokens);
  for (std::uint64_t t = 0; t < header.n_tokens; ++t) {
    series[t] = values[t * header.n_elements + element];
  }
  return series;
}

void write_trace(const std::filesystem::path& path, const ActivationTrace& trace) {
  if (trace.values.size() != trace.header.n_tokens * trace.header.n_elements) {
    throw Error("trace values do not match header dimensions");
  }
  TraceWriter writer(path, trace.header, trace.manifest);
  for (std::uint64_t t = 0; t < trace.header.n_tokens; ++t) writer.append(trace.frame(t));
  writer.close();
}

ActivationTrace read_trace(const std::filesystem::path& path) {
  TraceReader reader(path);
  ActivationTrace trace;
  trace.header = reader.header();
  const auto manifest_path = manifest_path_for(path);
  trace.manifest = std::filesystem::exists(manifest_path)
                       ? load_manifest(manifest_path)
                       : Manifest::flat("elements", reader.n_elements());
  trace.values.reserve(reader.n_tokens() * reader.n_elements());
  reader.stream_batches(reader.n_tokens(), [&](std::uint64_t, std::uint64_t,
                                               std::span<const float> v) {
    trace.values.insert(trace.values.end(), v.begin(), v.end());
  });
  return trace;
}

}  // namespace netscan
