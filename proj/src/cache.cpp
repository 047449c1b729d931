#include "saivla/cache.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "saivla/crc32.hpp"
#include "saivla/errors.hpp"
#include "saivla/half.hpp"

namespace saivla {

std::size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::F16: return 2;
        case Dtype::F32: return 4;
        case Dtype::F64: return 8;
    }
    throw InvalidArgument("dtype_size: unknown dtype");
}

const char* dtype_name(Dtype d) {
    switch (d) {
        case Dtype::F16: return "f16";
        case Dtype::F32: return "f32";
        case Dtype::F64: return "f64";
    }
    return "unknown";
}

Dtype dtype_from_name(const std::string& name) {
    if (name == "f16") return Dtype::F16;
    if (name == "f32") return Dtype::F32;
    if (name == "f64") return Dtype::F64;
    throw InvalidArgument("dtype_from_name: unknown dtype '" + name + "'");
}

std::size_t TensorEntry::element_count() const {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return n;
}

std::string CacheManifest::to_json() const {
    nlohmann::json j;
    j["version_hash"] = version_hash;
    j["dataset_id"] = dataset_id;
    j["task_id"] = task_id;
    j["big_brain_id"] = big_brain_id;
    j["tokenizer_id"] = tokenizer_id;
    j["prompt_id"] = prompt_id;
    j["prompt_hash"] = prompt_hash;
    j["layers"] = layers;
    j["n_context"] = n_context;
    j["d_model"] = d_model;
    j["k_chunk"] = k_chunk;
    j["camera_calib"] = camera_calib;
    j["roi_meta"] = roi_meta;
    j["timestamp_utc"] = timestamp_utc;
    j["dependencies"] = dependencies;
    nlohmann::json tens = nlohmann::json::array();
    for (const TensorEntry& t : tensors) {
        nlohmann::json e;
        e["name"] = t.name;
        e["shape"] = t.shape;
        e["dtype"] = dtype_name(t.dtype);
        e["offset"] = t.offset;
        e["length"] = t.length;
        e["crc32"] = t.crc32;
        tens.push_back(e);
    }
    j["tensors"] = tens;
    // nlohmann keeps object keys sorted, so dump() is canonical.
    return j.dump();
}

CacheManifest CacheManifest::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptArchive("manifest parse failed: " + std::string(e.what()));
    }
    CacheManifest m;
    try {
        m.version_hash = j.at("version_hash").get<std::string>();
        m.dataset_id = j.at("dataset_id").get<std::string>();
        m.task_id = j.at("task_id").get<std::string>();
        m.big_brain_id = j.at("big_brain_id").get<std::string>();
        m.tokenizer_id = j.at("tokenizer_id").get<std::string>();
        m.prompt_id = j.at("prompt_id").get<std::string>();
        m.prompt_hash = j.at("prompt_hash").get<std::string>();
        m.layers = j.at("layers").get<std::vector<std::string>>();
        m.n_context = j.at("n_context").get<std::size_t>();
        m.d_model = j.at("d_model").get<std::size_t>();
        m.k_chunk = j.at("k_chunk").get<std::size_t>();
        m.camera_calib = j.at("camera_calib").get<std::string>();
        m.roi_meta = j.at("roi_meta").get<std::string>();
        m.timestamp_utc = j.at("timestamp_utc").get<std::int64_t>();
        m.dependencies = j.at("dependencies").get<std::map<std::string, std::string>>();
        for (const auto& e : j.at("tensors")) {
            TensorEntry t;
            t.name = e.at("name").get<std::string>();
            t.shape = e.at("shape").get<std::vector<std::size_t>>();
            t.dtype = dtype_from_name(e.at("dtype").get<std::string>());
            t.offset = e.at("offset").get<std::uint64_t>();
            t.length = e.at("length").get<std::uint64_t>();
            t.crc32 = e.at("crc32").get<std::uint32_t>();
            m.tensors.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptArchive("manifest field error: " + std::string(e.what()));
    }
    return m;
}

namespace {

constexpr std::size_t kHeaderBytes = 16;  // magic + format version + manifest length

std::uint64_t align_up(std::uint64_t v, std::uint64_t a) {
    return (v + a - 1) / a * a;
}

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t read_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::vector<std::uint8_t> encode_payload(const Matrix& m, Dtype dtype) {
    std::vector<std::uint8_t> out(m.data.size() * dtype_size(dtype));
    std::uint8_t* p = out.data();
    switch (dtype) {
        case Dtype::F16:
            for (double v : m.data) {
                const std::uint16_t h = float_to_half_bits(static_cast<float>(v));
                std::memcpy(p, &h, 2);
                p += 2;
            }
            break;
        case Dtype::F32:
            for (double v : m.data) {
                const float f = static_cast<float>(v);
                std::memcpy(p, &f, 4);
                p += 4;
            }
            break;
        case Dtype::F64:
            std::memcpy(p, m.data.data(), m.data.size() * 8);
            break;
    }
    return out;
}

}  // namespace

Matrix TensorData::to_matrix() const {
    if (entry.shape.size() != 2) {
        throw InvalidArgument("TensorData: only rank-2 tensors decode to Matrix");
    }
    Matrix m(entry.shape[0], entry.shape[1]);
    const std::uint8_t* p = raw.data();
    for (double& v : m.data) {
        switch (entry.dtype) {
            case Dtype::F16: {
                std::uint16_t h;
                std::memcpy(&h, p, 2);
                v = static_cast<double>(half_bits_to_float(h));
                p += 2;
                break;
            }
            case Dtype::F32: {
                float f;
                std::memcpy(&f, p, 4);
                v = static_cast<double>(f);
                p += 4;
                break;
            }
            case Dtype::F64: {
                std::memcpy(&v, p, 8);
                p += 8;
                break;
            }
        }
    }
    return m;
}

void write_archive(const CacheManifest& manifest,
                   const std::vector<NamedTensor>& tensors, const std::string& path) {
    // Pre-declared manifest entries must all be backed by a payload.
    for (const TensorEntry& e : manifest.tensors) {
        const bool found = std::any_of(tensors.begin(), tensors.end(),
                                       [&](const NamedTensor& t) { return t.name == e.name; });
        if (!found) {
            throw IncompleteArchive("write_archive: missing payload for tensor '" +
                                    e.name + "'");
        }
    }

    std::vector<std::vector<std::uint8_t>> payloads;
    CacheManifest final_manifest = manifest;
    final_manifest.tensors.clear();
    for (const NamedTensor& t : tensors) {
        std::vector<std::uint8_t> bytes = encode_payload(t.values, t.dtype);
        TensorEntry e;
        e.name = t.name;
        e.shape = {t.values.rows, t.values.cols};
        e.dtype = t.dtype;
        e.length = bytes.size();
        e.crc32 = crc32(bytes.data(), bytes.size());
        final_manifest.tensors.push_back(std::move(e));
        payloads.push_back(std::move(bytes));
    }

    // Offsets depend on the manifest length which depends on the offsets;
    // iterate to a fixed point (digit growth settles in a couple rounds).
    std::string manifest_json = final_manifest.to_json();
    for (int iter = 0; iter < 16; ++iter) {
        std::uint64_t at = align_up(kHeaderBytes + manifest_json.size(), kCacheAlignment);
        for (TensorEntry& e : final_manifest.tensors) {
            e.offset = at;
            at = align_up(e.offset + e.length, kCacheAlignment);
        }
        std::string next = final_manifest.to_json();
        if (next == manifest_json) break;
        manifest_json = std::move(next);
    }

    std::string blob;
    blob.append(kCacheMagic, 4);
    append_u32(blob, kCacheFormatVersion);
    append_u64(blob, manifest_json.size());
    blob.append(manifest_json);
    blob.resize(align_up(blob.size(), kCacheAlignment), '\0');
    for (std::size_t i = 0; i < payloads.size(); ++i) {
        const TensorEntry& e = final_manifest.tensors[i];
        blob.resize(e.offset, '\0');
        blob.append(reinterpret_cast<const char*>(payloads[i].data()), payloads[i].size());
    }
    append_u32(blob, crc32(blob.data(), blob.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_archive: cannot open " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write_archive: write failed for " + path);
}

struct ArchiveReader::Impl {
    CacheManifest manifest;
    ReadMode mode = ReadMode::Eager;
    std::vector<std::uint8_t> bytes;  // eager mode
    const std::uint8_t* mapped = nullptr;
    std::size_t mapped_len = 0;
    int fd = -1;
    mutable std::size_t materialized = 0;
    mutable std::uint64_t bytes_read = 0;

    const std::uint8_t* base() const {
        return mode == ReadMode::Eager ? bytes.data() : mapped;
    }
    std::size_t size() const {
        return mode == ReadMode::Eager ? bytes.size() : mapped_len;
    }
    ~Impl() {
        if (mapped) ::munmap(const_cast<std::uint8_t*>(mapped), mapped_len);
        if (fd >= 0) ::close(fd);
    }
};

ArchiveReader::ArchiveReader() : impl_(new Impl) {}
ArchiveReader::~ArchiveReader() = default;
ArchiveReader::ArchiveReader(ArchiveReader&&) noexcept = default;
ArchiveReader& ArchiveReader::operator=(ArchiveReader&&) noexcept = default;

ArchiveReader ArchiveReader::open(const std::string& path, ReadMode mode) {
    ArchiveReader reader;
    Impl& impl = *reader.impl_;
    impl.mode = mode;

    if (mode == ReadMode::Eager) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("ArchiveReader: cannot open " + path);
        impl.bytes.assign(std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>());
    } else {
        impl.fd = ::open(path.c_str(), O_RDONLY);
        if (impl.fd < 0) throw IoError("ArchiveReader: cannot open " + path);
        struct stat st{};
        if (::fstat(impl.fd, &st) != 0) throw IoError("ArchiveReader: stat failed");
        impl.mapped_len = static_cast<std::size_t>(st.st_size);
        if (impl.mapped_len > 0) {
            void* p = ::mmap(nullptr, impl.mapped_len, PROT_READ, MAP_PRIVATE, impl.fd, 0);
            if (p == MAP_FAILED) throw IoError("ArchiveReader: mmap failed");
            impl.mapped = static_cast<const std::uint8_t*>(p);
        }
    }

    const std::uint8_t* base = impl.base();
    const std::size_t size = impl.size();
    if (size < kHeaderBytes || std::memcmp(base, kCacheMagic, 4) != 0) {
        throw NotACache("ArchiveReader: bad magic in " + path);
    }
    const std::uint32_t version = read_u32(base + 4);
    if (version != kCacheFormatVersion) {
        throw CorruptArchive("ArchiveReader: unsupported format version");
    }
    const std::uint64_t manifest_len = read_u64(base + 8);
    if (kHeaderBytes + manifest_len + 4 > size) {
        throw CorruptArchive("ArchiveReader: truncated manifest");
    }
    const std::string manifest_text(reinterpret_cast<const char*>(base) + kHeaderBytes,
                                    manifest_len);
    impl.manifest = CacheManifest::from_json(manifest_text);
    for (const TensorEntry& e : impl.manifest.tensors) {
        if (e.offset + e.length + 4 > size) {
            throw CorruptArchive("ArchiveReader: tensor '" + e.name +
                                 "' extends past end of file");
        }
    }
    return reader;
}

const CacheManifest& ArchiveReader::manifest() const { return impl_->manifest; }

bool ArchiveReader::has_tensor(const std::string& name) const {
    for (const TensorEntry& e : impl_->manifest.tensors) {
        if (e.name == name) return true;
    }
    return false;
}

TensorData ArchiveReader::tensor(const std::string& name) const {
    for (const TensorEntry& e : impl_->manifest.tensors) {
        if (e.name != name) continue;
        TensorData t;
        t.entry = e;
        t.raw.assign(impl_->base() + e.offset, impl_->base() + e.offset + e.length);
        ++impl_->materialized;
        impl_->bytes_read += e.length;
        return t;
    }
    throw InvalidArgument("ArchiveReader: no tensor named '" + name + "'");
}

std::size_t ArchiveReader::tensors_materialized() const { return impl_->materialized; }
std::uint64_t ArchiveReader::payload_bytes_read() const { return impl_->bytes_read; }

bool ValidationReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const ValidationCheck& c) { return c.pass; });
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
    for (const ValidationCheck& c : checks) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

namespace {

bool payload_has_non_finite(const TensorEntry& e, const std::uint8_t* data) {
    const std::size_t n = e.element_count();
    const std::uint8_t* p = data;
    for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        switch (e.dtype) {
            case Dtype::F16: {
                std::uint16_t h;
                std::memcpy(&h, p, 2);
                v = static_cast<double>(half_bits_to_float(h));
                p += 2;
                break;
            }
            case Dtype::F32: {
                float f;
                std::memcpy(&f, p, 4);
                v = static_cast<double>(f);
                p += 4;
                break;
            }
            case Dtype::F64:
                std::memcpy(&v, p, 8);
                p += 8;
                break;
        }
        if (!std::isfinite(v)) return true;
    }
    return false;
}

}  // namespace

ValidationReport validate_archive(const std::string& path,
                                  const std::optional<std::string>& expected_version_hash) {
    ValidationReport report;
    const auto add = [&report](const std::string& name, bool pass,
                               const std::string& detail = "") {
        report.checks.push_back({name, pass, detail});
    };

    std::ifstream in(path, std::ios::binary);
    if (!in) {
        add("open", false, "cannot open file");
        return report;
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    add("open", true);

    if (bytes.size() < kHeaderBytes + 4 || std::memcmp(bytes.data(), kCacheMagic, 4) != 0) {
        add("magic", false, "missing SVC1 magic or file too short");
        return report;
    }
    add("magic", true);

    const std::uint32_t version = read_u32(bytes.data() + 4);
    add("format_version", version == kCacheFormatVersion,
        version == kCacheFormatVersion ? "" : "unsupported version");

    const std::uint64_t manifest_len = read_u64(bytes.data() + 8);
    if (kHeaderBytes + manifest_len + 4 > bytes.size()) {
        add("manifest_parse", false, "truncated manifest");
        return report;
    }
    CacheManifest manifest;
    try {
        manifest = CacheManifest::from_json(
            std::string(reinterpret_cast<const char*>(bytes.data()) + kHeaderBytes,
                        manifest_len));
        add("manifest_parse", true);
    } catch (const std::exception& e) {
        add("manifest_parse", false, e.what());
        return report;
    }

    // Byte accounting: sizes match shapes, offsets aligned / ordered /
    // non-overlapping, and the declared extents tile the file exactly.
    {
        bool ok = true;
        std::string detail;
        std::uint64_t expect_at = align_up(kHeaderBytes + manifest_len, kCacheAlignment);
        for (const TensorEntry& e : manifest.tensors) {
            if (e.length != e.element_count() * dtype_size(e.dtype)) {
                ok = false;
                detail = "tensor '" + e.name + "' length disagrees with shape*dtype";
                break;
            }
            if (e.offset % kCacheAlignment != 0 || e.offset != expect_at) {
                ok = false;
                detail = "tensor '" + e.name + "' offset misaligned or overlapping";
                break;
            }
            if (e.offset + e.length + 4 > bytes.size()) {
                ok = false;
                detail = "tensor '" + e.name + "' extends past end of file";
                break;
            }
            expect_at = align_up(e.offset + e.length, kCacheAlignment);
        }
        if (ok) {
            const std::uint64_t expect_size =
                (manifest.tensors.empty()
                     ? align_up(kHeaderBytes + manifest_len, kCacheAlignment)
                     : manifest.tensors.back().offset + manifest.tensors.back().length) +
                4;
            if (expect_size != bytes.size()) {
                ok = false;
                detail = "declared bytes do not account for file size";
            }
        }
        add("byte_accounting", ok, detail);
        if (!ok) return report;
    }

    for (const TensorEntry& e : manifest.tensors) {
        const std::uint32_t actual = crc32(bytes.data() + e.offset, e.length);
        add("tensor_crc32:" + e.name, actual == e.crc32,
            actual == e.crc32 ? "" : "payload checksum mismatch");
    }

    {
        const std::uint32_t stored = read_u32(bytes.data() + bytes.size() - 4);
        const std::uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
        add("archive_crc32", stored == actual,
            stored == actual ? "" : "whole-archive checksum mismatch");
    }

    for (const TensorEntry& e : manifest.tensors) {
        const bool bad = payload_has_non_finite(e, bytes.data() + e.offset);
        add("finite_scan:" + e.name, !bad, bad ? "NaN or Inf in payload" : "");
    }

    {
        const auto now = std::chrono::system_clock::now();
        const std::int64_t now_s =
            std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
                .count();
        const bool ok = manifest.timestamp_utc <= now_s + 60;
        add("timestamp_sanity", ok, ok ? "" : "manifest timestamp is in the future");
    }

    if (expected_version_hash) {
        const bool ok = manifest.version_hash == *expected_version_hash;
        add("version_hash", ok,
            ok ? "" : "expected " + *expected_version_hash + ", found " +
                          manifest.version_hash);
    }

    return report;
}

}  // namespace saivla
