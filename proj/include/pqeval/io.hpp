#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pqeval/label_map.hpp"

namespace pqeval {

static_assert(std::endian::native == std::endian::little,
              "label-map I/O assumes a little-endian host");

enum class MapFormat { npy, raw };

namespace detail {

struct Dtype {
    unsigned width = 0;  // bytes per element
    bool is_signed = false;
};

inline Dtype parse_npy_descr(const std::string& descr, const std::string& path) {
    if (descr.size() != 3)
        throw std::runtime_error(path + ": unsupported dtype '" + descr + "'");
    const char order = descr[0];
    const char kind = descr[1];
    const char digit = descr[2];
    Dtype dt;
    switch (digit) {
        case '1': dt.width = 1; break;
        case '2': dt.width = 2; break;
        case '4': dt.width = 4; break;
        case '8': dt.width = 8; break;
        default:
            throw std::runtime_error(path + ": unsupported dtype '" + descr + "'");
    }
    if (kind == 'i') dt.is_signed = true;
    else if (kind != 'u')
        throw std::runtime_error(path + ": unsupported dtype '" + descr + "'");
    const bool order_ok = order == '<' || (order == '|' && dt.width == 1);
    if (!order_ok)
        throw std::runtime_error(path + ": unsupported byte order in '" + descr + "'");
    return dt;
}

inline Dtype parse_raw_dtype(const std::string& name, const std::string& path) {
    Dtype dt;
    std::string t = name;
    if (!t.empty() && (t[0] == 'u' || t[0] == 'i')) {
        dt.is_signed = t[0] == 'i';
        const std::string bits = t.substr(1);
        if (bits == "8") dt.width = 1;
        else if (bits == "16") dt.width = 2;
        else if (bits == "32") dt.width = 4;
        else if (bits == "64") dt.width = 8;
    }
    if (dt.width == 0)
        throw std::runtime_error(path + ": unsupported dtype '" + name + "'");
    return dt;
}

inline std::vector<label_t> decode_payload(const std::vector<char>& bytes,
                                           Dtype dt, std::size_t count,
                                           const std::string& path) {
    if (bytes.size() != count * dt.width)
        throw std::runtime_error(path + ": payload size mismatch (expected " +
                                 std::to_string(count * dt.width) + " bytes, got " +
                                 std::to_string(bytes.size()) + ")");
    std::vector<label_t> out(count);
    const char* p = bytes.data();
    for (std::size_t i = 0; i < count; ++i, p += dt.width) {
        std::uint64_t v = 0;
        std::memcpy(&v, p, dt.width);
        if (dt.is_signed) {
            std::int64_t sv = 0;
            switch (dt.width) {
                case 1: sv = static_cast<std::int8_t>(v); break;
                case 2: sv = static_cast<std::int16_t>(v); break;
                case 4: sv = static_cast<std::int32_t>(v); break;
                case 8: sv = static_cast<std::int64_t>(v); break;
            }
            if (sv < 0)
                throw std::runtime_error(path + ": negative labels are not allowed");
            v = static_cast<std::uint64_t>(sv);
        }
        out[i] = v;
    }
    return out;
}

// Narrowest unsigned width that holds every label in the map.
inline unsigned minimal_width(const LabelMap& map) {
    label_t mx = 0;
    for (std::size_t i = 0; i < map.size(); ++i) mx = std::max(mx, map[i]);
    if (mx <= 0xFFull) return 1;
    if (mx <= 0xFFFFull) return 2;
    if (mx <= 0xFFFFFFFFull) return 4;
    return 8;
}

inline void encode_payload(const LabelMap& map, unsigned width,
                           std::vector<char>& out) {
    out.resize(map.size() * width);
    char* p = out.data();
    for (std::size_t i = 0; i < map.size(); ++i, p += width) {
        const std::uint64_t v = map[i];
        std::memcpy(p, &v, width);
    }
}

inline std::vector<char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error(path.string() + ": cannot open for reading");
    in.seekg(0, std::ios::end);
    const auto n = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<char> bytes(static_cast<std::size_t>(n));
    if (n > 0) in.read(bytes.data(), n);
    if (!in)
        throw std::runtime_error(path.string() + ": read failed");
    return bytes;
}

inline void write_all(const std::filesystem::path& path, const void* data,
                      std::size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error(path.string() + ": cannot open for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    out.flush();
    if (!out)
        throw std::runtime_error(path.string() + ": write failed");
}

inline LabelMap load_npy(const std::filesystem::path& path) {
    const std::string name = path.string();
    const auto bytes = read_all(path);
    static const char magic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
    if (bytes.size() < 10 || std::memcmp(bytes.data(), magic, 6) != 0)
        throw std::runtime_error(name + ": not an npy file");
    if (bytes[6] != 1 || bytes[7] != 0)
        throw std::runtime_error(name + ": only npy format version 1.0 is supported");
    const std::size_t header_len =
        static_cast<unsigned char>(bytes[8]) |
        (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    if (bytes.size() < 10 + header_len)
        throw std::runtime_error(name + ": truncated npy header");
    const std::string header(bytes.data() + 10, header_len);

    auto find_value = [&](const std::string& key) -> std::size_t {
        const std::size_t at = header.find("'" + key + "'");
        if (at == std::string::npos)
            throw std::runtime_error(name + ": npy header missing key '" + key + "'");
        const std::size_t colon = header.find(':', at);
        if (colon == std::string::npos)
            throw std::runtime_error(name + ": malformed npy header");
        return colon + 1;
    };

    // descr
    std::size_t pos = find_value("descr");
    const std::size_t q0 = header.find('\'', pos);
    const std::size_t q1 = header.find('\'', q0 + 1);
    if (q0 == std::string::npos || q1 == std::string::npos)
        throw std::runtime_error(name + ": malformed descr in npy header");
    const Dtype dt = parse_npy_descr(header.substr(q0 + 1, q1 - q0 - 1), name);

    // fortran_order
    pos = find_value("fortran_order");
    while (pos < header.size() && header[pos] == ' ') ++pos;
    if (header.compare(pos, 4, "True") == 0)
        throw std::runtime_error(name + ": fortran_order=True is not supported");
    if (header.compare(pos, 5, "False") != 0)
        throw std::runtime_error(name + ": malformed fortran_order in npy header");

    // shape
    pos = find_value("shape");
    const std::size_t p0 = header.find('(', pos);
    const std::size_t p1 = header.find(')', p0);
    if (p0 == std::string::npos || p1 == std::string::npos)
        throw std::runtime_error(name + ": malformed shape in npy header");
    std::vector<std::size_t> shape;
    std::string tup = header.substr(p0 + 1, p1 - p0 - 1);
    std::size_t start = 0;
    while (start < tup.size()) {
        std::size_t end = tup.find(',', start);
        if (end == std::string::npos) end = tup.size();
        std::string tok = tup.substr(start, end - start);
        tok.erase(std::remove(tok.begin(), tok.end(), ' '), tok.end());
        if (!tok.empty()) shape.push_back(std::stoull(tok));
        start = end + 1;
    }
    if (shape.size() < 2 || shape.size() > 3)
        throw std::runtime_error(name + ": unsupported dimensionality " +
                                 std::to_string(shape.size()) + " (need 2 or 3)");

    std::size_t count = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw std::runtime_error(name + ": zero-sized axis");
        count *= e;
    }
    std::vector<char> payload(bytes.begin() + static_cast<std::ptrdiff_t>(10 + header_len),
                              bytes.end());
    return LabelMap(std::move(shape), decode_payload(payload, dt, count, name));
}

inline void save_npy(const LabelMap& map, const std::filesystem::path& path) {
    const unsigned width = minimal_width(map);
    std::string descr = (width == 1 ? "|" : "<");
    descr += 'u';
    descr += std::to_string(width);

    std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': (";
    for (std::size_t k = 0; k < map.shape().size(); ++k) {
        if (k) dict += ", ";
        dict += std::to_string(map.shape()[k]);
    }
    dict += "), }";
    // Pad so the full header (magic + version + length + dict) is a
    // multiple of 64 bytes, newline-terminated, as numpy writes it.
    std::size_t total = 10 + dict.size() + 1;
    const std::size_t pad = (64 - total % 64) % 64;
    dict.append(pad, ' ');
    dict += '\n';

    std::string head;
    head += "\x93NUMPY";
    head += '\x01';
    head += '\x00';
    const std::size_t hl = dict.size();
    head += static_cast<char>(hl & 0xFF);
    head += static_cast<char>((hl >> 8) & 0xFF);
    head += dict;

    std::vector<char> payload;
    encode_payload(map, width, payload);
    std::vector<char> bytes(head.begin(), head.end());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    write_all(path, bytes.data(), bytes.size());
}

inline std::filesystem::path sidecar_path(std::filesystem::path bin) {
    bin.replace_extension(".json");
    return bin;
}

inline LabelMap load_raw(const std::filesystem::path& path) {
    std::filesystem::path bin = path;
    if (bin.extension() == ".json") bin.replace_extension(".bin");
    const std::filesystem::path side = sidecar_path(bin);
    const std::string name = bin.string();

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_all(side));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(side.string() + ": invalid sidecar: " + e.what());
    }
    if (!meta.contains("shape") || !meta["shape"].is_array())
        throw std::runtime_error(side.string() + ": sidecar missing 'shape' array");
    if (!meta.contains("dtype") || !meta["dtype"].is_string())
        throw std::runtime_error(side.string() + ": sidecar missing 'dtype' string");

    std::vector<std::size_t> shape;
    for (const auto& v : meta["shape"]) {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
            throw std::runtime_error(side.string() + ": shape extents must be positive");
        shape.push_back(v.get<std::size_t>());
    }
    if (shape.size() < 2 || shape.size() > 3)
        throw std::runtime_error(name + ": unsupported dimensionality " +
                                 std::to_string(shape.size()) + " (need 2 or 3)");
    const Dtype dt = parse_raw_dtype(meta["dtype"].get<std::string>(), name);

    std::vector<double> spacing;
    if (meta.contains("spacing")) {
        for (const auto& v : meta["spacing"]) {
            if (!v.is_number() || v.get<double>() <= 0)
                throw std::runtime_error(side.string() + ": spacing must be positive");
            spacing.push_back(v.get<double>());
        }
        if (spacing.size() != shape.size())
            throw std::runtime_error(side.string() + ": spacing length must equal dims");
    }

    std::size_t count = 1;
    for (std::size_t e : shape) count *= e;
    return LabelMap(std::move(shape),
                    decode_payload(read_all(bin), dt, count, name),
                    std::move(spacing));
}

inline void save_raw(const LabelMap& map, const std::filesystem::path& path) {
    std::filesystem::path bin = path;
    if (bin.extension() != ".bin") bin.replace_extension(".bin");
    const unsigned width = minimal_width(map);

    nlohmann::ordered_json meta;
    meta["shape"] = map.shape();
    meta["dtype"] = "u" + std::to_string(width * 8);
    meta["spacing"] = map.spacing();
    const std::string text = meta.dump(2) + "\n";
    write_all(sidecar_path(bin), text.data(), text.size());

    std::vector<char> payload;
    encode_payload(map, width, payload);
    write_all(bin, payload.data(), payload.size());
}

}  // namespace detail

/// Load a label map from `.npy` (format version 1.0, C-order integer
/// payloads) or raw `.bin` + `.json` sidecar. Without a hint the format is
/// inferred from the extension.
inline LabelMap load_label_map(const std::filesystem::path& path,
                               std::optional<MapFormat> format_hint = std::nullopt) {
    MapFormat fmt;
    if (format_hint) {
        fmt = *format_hint;
    } else {
        const auto ext = path.extension();
        if (ext == ".npy") fmt = MapFormat::npy;
        else if (ext == ".bin" || ext == ".json") fmt = MapFormat::raw;
        else
            throw std::runtime_error(path.string() +
                                     ": cannot infer format (use .npy or .bin, or pass a hint)");
    }
    return fmt == MapFormat::npy ? detail::load_npy(path) : detail::load_raw(path);
}

/// Write a label map. The narrowest unsigned dtype that fits the labels is
/// chosen. `.npy` carries labels/shape only; the raw sidecar also keeps
/// spacing.
inline void save_label_map(const LabelMap& map, const std::filesystem::path& path,
                           MapFormat format) {
    if (format == MapFormat::npy) detail::save_npy(map, path);
    else detail::save_raw(map, path);
}

}  // namespace pqeval
