#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "saivla/matrix.hpp"

namespace saivla {

enum class Dtype : std::uint8_t { F16 = 0, F32 = 1, F64 = 2 };

std::size_t dtype_size(Dtype d);
const char* dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& name);

struct TensorEntry {
    std::string name;
    std::vector<std::size_t> shape;  // {rows, cols} for matrices
    Dtype dtype = Dtype::F32;
    std::uint64_t offset = 0;  // absolute byte offset in the archive
    std::uint64_t length = 0;  // payload bytes
    std::uint32_t crc32 = 0;

    std::size_t element_count() const;
};

struct CacheManifest {
    std::string version_hash;
    std::string dataset_id;
    std::string task_id;
    std::string big_brain_id;
    std::string tokenizer_id;
    std::string prompt_id;
    std::string prompt_hash;
    std::vector<std::string> layers;
    std::size_t n_context = 0;
    std::size_t d_model = 0;
    std::size_t k_chunk = 0;
    std::string camera_calib;  // reference (path or id)
    std::string roi_meta;
    std::int64_t timestamp_utc = 0;  // seconds
    std::map<std::string, std::string> dependencies;
    std::vector<TensorEntry> tensors;  // writer fills offsets/lengths/crcs

    std::string to_json() const;  // canonical (sorted keys) serialization
    static CacheManifest from_json(const std::string& text);
};

struct NamedTensor {
    std::string name;
    Matrix values;
    Dtype dtype = Dtype::F32;
};

// Archive layout (bit-exact):
//   [magic "SVC1" 4B][format version u32 LE][manifest length u64 LE]
//   [manifest JSON, UTF-8][zero padding to 64B][payloads, each 64B-aligned]
//   [archive crc32 u32 LE over all preceding bytes]
inline constexpr char kCacheMagic[4] = {'S', 'V', 'C', '1'};
inline constexpr std::uint32_t kCacheFormatVersion = 1;
inline constexpr std::size_t kCacheAlignment = 64;

// Serializes payloads per their dtype (f64 values quantized on write) and
// finalizes tensor offsets/lengths/checksums in the stored manifest. If the
// manifest pre-declares tensor entries, every entry must have a payload.
void write_archive(const CacheManifest& manifest,
                   const std::vector<NamedTensor>& tensors, const std::string& path);

enum class ReadMode : std::uint8_t { Eager = 0, Mapped = 1 };

struct TensorData {
    TensorEntry entry;
    std::vector<std::uint8_t> raw;  // payload bytes as stored
    Matrix to_matrix() const;       // decoded to float64
};

class ArchiveReader {
public:
    // Throws NotACache on bad magic, CorruptArchive on truncation.
    static ArchiveReader open(const std::string& path, ReadMode mode = ReadMode::Eager);
    ~ArchiveReader();
    ArchiveReader(ArchiveReader&&) noexcept;
    ArchiveReader& operator=(ArchiveReader&&) noexcept;
    ArchiveReader(const ArchiveReader&) = delete;
    ArchiveReader& operator=(const ArchiveReader&) = delete;

    const CacheManifest& manifest() const;
    bool has_tensor(const std::string& name) const;
    // Materializes one tensor; in mapped mode only its byte range is copied.
    TensorData tensor(const std::string& name) const;

    // Instrumentation for the lazy-access contract.
    std::size_t tensors_materialized() const;
    std::uint64_t payload_bytes_read() const;

private:
    ArchiveReader();
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct ValidationCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool all_pass() const;
    const ValidationCheck* find(const std::string& name) const;
};

// Runs every integrity check and reports results instead of throwing:
// magic, manifest parse, byte accounting, per-tensor crc32, archive crc32,
// NaN/Inf scan, timestamp sanity, optional version-hash equality.
ValidationReport validate_archive(const std::string& path,
                                  const std::optional<std::string>& expected_version_hash =
                                      std::nullopt);

}  // namespace saivla
