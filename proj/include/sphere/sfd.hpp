#pragma once

// Bit-exact binary containers:
//   SFD  ("SFD1"): one multi-channel spherical field, float64 little-endian,
//                  row-major [C, H, W], self-describing JSON header.
//   SWB  ("SWB1"): named flat weight tensors with an optional metadata block.
//
// Both formats are 4-byte magic + uint32 little-endian header length + UTF-8
// JSON header + raw payload. Read failures carry a distinct error code.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sphere/field.hpp"
#include "sphere/grid.hpp"

namespace sphere {

enum class IoErrorCode {
    bad_magic,
    header_mismatch,
    payload_length_mismatch,
    unknown_grid_kind,
};

class IoError : public std::runtime_error {
public:
    IoError(IoErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    IoErrorCode code() const { return code_; }

private:
    IoErrorCode code_;
};

namespace detail {

inline void append_u32le(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void append_f64le(std::string& s, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double read_f64le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorCode::header_mismatch, "cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorCode::header_mismatch, "cannot open " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoErrorCode::header_mismatch, "short write to " + path);
}

// common frame: returns (header json, payload offset)
inline std::pair<nlohmann::json, std::size_t> parse_frame(
    const std::vector<unsigned char>& bytes, const char magic[4]) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), magic, 4) != 0)
        throw IoError(IoErrorCode::bad_magic, "bad magic");
    const std::uint32_t hlen = read_u32le(bytes.data() + 4);
    if (bytes.size() < 8 + static_cast<std::size_t>(hlen))
        throw IoError(IoErrorCode::header_mismatch, "header length exceeds file size");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    } catch (const nlohmann::json::exception&) {
        throw IoError(IoErrorCode::header_mismatch, "header is not valid JSON");
    }
    return {header, 8 + static_cast<std::size_t>(hlen)};
}

}  // namespace detail

struct SfdContents {
    SphericalField field;
    std::vector<std::string> channel_names;
};

inline void write_sfd(const std::string& path, const SphericalField& field,
                      const std::vector<std::string>& channel_names = {}) {
    std::vector<std::string> names = channel_names;
    if (names.empty())
        for (std::size_t c = 0; c < field.channels; ++c)
            names.push_back("ch" + std::to_string(c));
    if (names.size() != field.channels)
        throw IoError(IoErrorCode::header_mismatch, "channel name count mismatch");

    nlohmann::json header{{"grid_kind", to_string(field.grid.kind)},
                          {"nlat", field.grid.nlat},
                          {"nlon", field.grid.nlon},
                          {"channels", field.channels},
                          {"channel_names", names},
                          {"dtype", "f64le"},
                          {"layout", "c,h,w"}};
    const std::string htext = header.dump();

    std::string bytes;
    bytes.reserve(8 + htext.size() + 8 * field.data.size());
    bytes.append("SFD1", 4);
    detail::append_u32le(bytes, static_cast<std::uint32_t>(htext.size()));
    bytes.append(htext);
    for (double v : field.data) detail::append_f64le(bytes, v);
    detail::write_file(path, bytes);
}

inline SfdContents read_sfd(const std::string& path) {
    const std::vector<unsigned char> bytes = detail::read_file(path);
    const auto [header, offset] = detail::parse_frame(bytes, "SFD1");

    std::string kind, dtype, layout;
    std::size_t nlat = 0, nlon = 0, channels = 0;
    std::vector<std::string> names;
    try {
        kind = header.at("grid_kind").get<std::string>();
        nlat = header.at("nlat").get<std::size_t>();
        nlon = header.at("nlon").get<std::size_t>();
        channels = header.at("channels").get<std::size_t>();
        names = header.at("channel_names").get<std::vector<std::string>>();
        dtype = header.at("dtype").get<std::string>();
        layout = header.at("layout").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw IoError(IoErrorCode::header_mismatch, "header field missing or ill-typed");
    }
    if (dtype != "f64le" || layout != "c,h,w")
        throw IoError(IoErrorCode::header_mismatch, "unsupported dtype or layout");
    if (names.size() != channels)
        throw IoError(IoErrorCode::header_mismatch, "channel name count mismatch");

    GridSpec grid;
    if (kind == "equiangular")
        grid = build_equiangular(nlat, nlon);
    else if (kind == "gaussian")
        grid = build_gaussian(nlat, nlon);
    else
        throw IoError(IoErrorCode::unknown_grid_kind, "unknown grid_kind '" + kind + "'");

    const std::size_t want = channels * nlat * nlon * 8;
    if (bytes.size() - offset != want)
        throw IoError(IoErrorCode::payload_length_mismatch, "payload length mismatch");

    SfdContents out{SphericalField(grid, channels), std::move(names)};
    for (std::size_t k = 0; k < out.field.data.size(); ++k)
        out.field.data[k] = detail::read_f64le(bytes.data() + offset + 8 * k);
    return out;
}

// --- named weight tensors ---------------------------------------------------

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;
};

inline void write_weights(const std::string& path, const std::vector<NamedTensor>& tensors,
                          const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::json list = nlohmann::json::array();
    std::size_t offset = 0;
    for (const NamedTensor& t : tensors) {
        std::size_t n = 1;
        for (std::size_t d : t.shape) n *= d;
        if (n != t.data.size())
            throw IoError(IoErrorCode::header_mismatch,
                          "tensor shape does not match data: " + t.name);
        list.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
        offset += n;
    }
    nlohmann::json header{{"dtype", "f64le"}, {"tensors", list}, {"meta", meta}};
    const std::string htext = header.dump();

    std::string bytes;
    bytes.append("SWB1", 4);
    detail::append_u32le(bytes, static_cast<std::uint32_t>(htext.size()));
    bytes.append(htext);
    for (const NamedTensor& t : tensors)
        for (double v : t.data) detail::append_f64le(bytes, v);
    detail::write_file(path, bytes);
}

struct WeightsContents {
    std::vector<NamedTensor> tensors;
    nlohmann::json meta;
};

inline WeightsContents read_weights(const std::string& path) {
    const std::vector<unsigned char> bytes = detail::read_file(path);
    const auto [header, offset] = detail::parse_frame(bytes, "SWB1");
    WeightsContents out;
    try {
        out.meta = header.value("meta", nlohmann::json::object());
        std::size_t total = 0;
        for (const auto& item : header.at("tensors")) {
            NamedTensor t;
            t.name = item.at("name").get<std::string>();
            t.shape = item.at("shape").get<std::vector<std::size_t>>();
            std::size_t n = 1;
            for (std::size_t d : t.shape) n *= d;
            const std::size_t toff = item.at("offset").get<std::size_t>();
            if (toff != total)
                throw IoError(IoErrorCode::header_mismatch, "non-contiguous tensor offsets");
            t.data.resize(n);
            total += n;
            out.tensors.push_back(std::move(t));
        }
        if (bytes.size() - offset != total * 8)
            throw IoError(IoErrorCode::payload_length_mismatch, "payload length mismatch");
        std::size_t pos = offset;
        for (NamedTensor& t : out.tensors)
            for (double& v : t.data) {
                v = detail::read_f64le(bytes.data() + pos);
                pos += 8;
            }
    } catch (const nlohmann::json::exception&) {
        throw IoError(IoErrorCode::header_mismatch, "weights header field missing");
    }
    return out;
}

}  // namespace sphere
