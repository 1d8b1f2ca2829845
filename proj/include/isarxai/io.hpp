#pragma once
// On-disk formats: binary dataset and checkpoint files (little-endian,
// binary32 tensors), CSV tables with RFC-4180 quoting, and PGM/PPM rasters.
// All writers are deterministic byte-for-byte given equal inputs.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "isarxai/common.hpp"
#include "isarxai/imaging.hpp"
#include "isarxai/lrp.hpp"
#include "isarxai/nn.hpp"

namespace isarxai {

namespace detail {

inline void put_bytes(std::string& out, const void* data, std::size_t len) {
    out.append(static_cast<const char*>(data), len);
}

inline void put_u32(std::string& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    put_bytes(out, b, 4);
}

inline void put_u64(std::string& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void put_i32(std::string& out, std::int32_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

// Cursor over a fully loaded file; every read checks the remaining length.
class ByteReader {
  public:
    ByteReader(std::string data, std::string name)
        : data_(std::move(data)), name_(std::move(name)) {}

    void need(std::size_t len) const {
        if (pos_ + len > data_.size())
            throw IoError(name_ + ": truncated file");
    }

    void raw(void* dst, std::size_t len) {
        need(len);
        std::copy(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + len),
                  static_cast<char*>(dst));
        pos_ += len;
    }

    std::uint32_t u32() {
        unsigned char b[4];
        raw(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::uint64_t u64() {
        std::uint64_t lo = u32();
        std::uint64_t hi = u32();
        return lo | (hi << 32);
    }

    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string str() {
        std::uint32_t len = u32();
        need(len);
        std::string s = data_.substr(pos_, len);
        pos_ += len;
        return s;
    }

    bool at_end() const { return pos_ == data_.size(); }
    const std::string& name() const { return name_; }

  private:
    std::string data_;
    std::string name_;
    std::size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path + ": write failed");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError(path + ": read failed");
    return bytes;
}

}  // namespace detail

// ---- dataset file --------------------------------------------------------------

// Image dataset with per-item metadata: class id, initial rotation angle,
// and the chirp bandwidth the image was formed at.
struct StoredDataset {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::string> class_names;
    std::vector<int> class_ids;
    std::vector<double> initial_angles;  // radians
    std::vector<double> bandwidths;      // Hz
    std::vector<float> pixels;           // count * height * width

    std::size_t count() const { return class_ids.size(); }

    void validate() const {
        require_param(height > 0 && width > 0, "StoredDataset: empty image dims");
        require_param(initial_angles.size() == count() && bandwidths.size() == count() &&
                          pixels.size() == count() * height * width,
                      "StoredDataset: inconsistent field lengths");
    }

    const float* image(std::size_t i) const { return pixels.data() + i * height * width; }
};

inline constexpr char kDatasetMagic[] = "ISARDS1";
inline constexpr char kCheckpointMagic[] = "ISARNN1";

inline std::string serialize_dataset(const StoredDataset& ds) {
    ds.validate();
    std::string out;
    detail::put_bytes(out, kDatasetMagic, 7);
    detail::put_u32(out, 1);  // version
    detail::put_u64(out, ds.count());
    detail::put_u32(out, static_cast<std::uint32_t>(ds.height));
    detail::put_u32(out, static_cast<std::uint32_t>(ds.width));
    detail::put_u32(out, static_cast<std::uint32_t>(ds.class_names.size()));
    for (const auto& name : ds.class_names) detail::put_string(out, name);
    for (std::size_t i = 0; i < ds.count(); ++i) {
        detail::put_i32(out, ds.class_ids[i]);
        detail::put_f64(out, ds.initial_angles[i]);
        detail::put_f64(out, ds.bandwidths[i]);
        const float* px = ds.image(i);
        for (std::size_t k = 0; k < ds.height * ds.width; ++k) detail::put_f32(out, px[k]);
    }
    return out;
}

inline void write_dataset(const std::string& path, const StoredDataset& ds) {
    detail::write_file(path, serialize_dataset(ds));
}

inline StoredDataset read_dataset(const std::string& path) {
    detail::ByteReader r(detail::read_file(path), path);
    char magic[7];
    r.raw(magic, 7);
    if (!std::equal(magic, magic + 7, kDatasetMagic))
        throw IoError(path + ": not a dataset file");
    std::uint32_t version = r.u32();
    if (version != 1) throw IoError(path + ": unsupported dataset version");

    StoredDataset ds;
    std::uint64_t count = r.u64();
    ds.height = r.u32();
    ds.width = r.u32();
    std::uint32_t n_names = r.u32();
    for (std::uint32_t i = 0; i < n_names; ++i) ds.class_names.push_back(r.str());
    if (ds.height == 0 || ds.width == 0) throw IoError(path + ": empty image dims");

    ds.class_ids.reserve(count);
    ds.initial_angles.reserve(count);
    ds.bandwidths.reserve(count);
    ds.pixels.reserve(count * ds.height * ds.width);
    for (std::uint64_t i = 0; i < count; ++i) {
        ds.class_ids.push_back(r.i32());
        ds.initial_angles.push_back(r.f64());
        ds.bandwidths.push_back(r.f64());
        for (std::size_t k = 0; k < ds.height * ds.width; ++k) ds.pixels.push_back(r.f32());
    }
    if (!r.at_end()) throw IoError(path + ": trailing bytes");
    ds.validate();
    return ds;
}

// ---- checkpoint file -----------------------------------------------------------

struct Checkpoint {
    NetworkState<float> net;
    std::uint64_t training_seed = 0;
    std::uint64_t epoch = 0;
};

inline std::string serialize_checkpoint(const Checkpoint& ck) {
    std::string out;
    detail::put_bytes(out, kCheckpointMagic, 7);
    detail::put_u32(out, 1);  // version
    const NetworkSpec& spec = ck.net.spec;
    detail::put_u32(out, static_cast<std::uint32_t>(spec.input_h));
    detail::put_u32(out, static_cast<std::uint32_t>(spec.input_w));
    detail::put_u32(out, static_cast<std::uint32_t>(spec.conv_channels.size()));
    for (std::size_t c : spec.conv_channels) detail::put_u32(out, static_cast<std::uint32_t>(c));
    detail::put_u32(out, static_cast<std::uint32_t>(spec.fc_widths.size()));
    for (std::size_t c : spec.fc_widths) detail::put_u32(out, static_cast<std::uint32_t>(c));
    detail::put_u64(out, ck.training_seed);
    detail::put_u64(out, ck.epoch);
    for (const Tensor<float>* t : ck.net.tensors())
        for (float v : t->data) detail::put_f32(out, v);
    return out;
}

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    detail::write_file(path, serialize_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::string& path) {
    detail::ByteReader r(detail::read_file(path), path);
    char magic[7];
    r.raw(magic, 7);
    if (!std::equal(magic, magic + 7, kCheckpointMagic))
        throw IoError(path + ": not a checkpoint file");
    std::uint32_t version = r.u32();
    if (version != 1) throw IoError(path + ": unsupported checkpoint version");

    NetworkSpec spec;
    spec.input_h = r.u32();
    spec.input_w = r.u32();
    spec.conv_channels.resize(r.u32());
    for (auto& c : spec.conv_channels) c = r.u32();
    std::uint32_t n_fc = r.u32();
    spec.fc_widths.resize(n_fc);
    for (auto& c : spec.fc_widths) c = r.u32();
    try {
        spec.validate();
    } catch (const ParameterError& e) {
        throw IoError(path + ": invalid network shape: " + e.what());
    }

    Checkpoint ck;
    ck.training_seed = r.u64();
    ck.epoch = r.u64();
    ck.net = make_zero_state<float>(spec);
    for (Tensor<float>* t : ck.net.tensors())
        for (float& v : t->data) v = r.f32();
    if (!r.at_end()) throw IoError(path + ": trailing bytes");
    return ck;
}

// ---- CSV -----------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// RFC-4180 quoting: fields holding commas, quotes, or line breaks are wrapped
// in double quotes with inner quotes doubled. Rows end with plain newlines.
inline std::string csv_escape(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline std::string to_csv(const CsvTable& table) {
    require_param(!table.header.empty(), "to_csv: header row required");
    for (const auto& row : table.rows)
        require_param(row.size() == table.header.size(), "to_csv: ragged row");
    std::string out;
    auto emit = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += csv_escape(row[i]);
        }
        out += '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    return out;
}

inline void write_csv(const std::string& path, const CsvTable& table) {
    detail::write_file(path, to_csv(table));
}

// Parses RFC-4180 quoting; accepts both \n and \r\n row endings. The first
// row is the header.
inline CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        if (!any) {
            table.header = row;
            any = true;
        } else {
            table.rows.push_back(row);
        }
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_row();
        } else {
            field += c;
        }
    }
    if (in_quotes) throw IoError("parse_csv: unterminated quoted field");
    if (!field.empty() || !row.empty()) end_row();
    if (!any) throw IoError("parse_csv: header row required");
    return table;
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(detail::read_file(path)); }

// ---- rasters -------------------------------------------------------------------

inline void write_pgm(const std::string& path, const std::vector<std::uint8_t>& gray,
                      std::size_t height, std::size_t width) {
    require_param(gray.size() == height * width && height > 0, "write_pgm: shape mismatch");
    std::string out =
        "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    detail::put_bytes(out, gray.data(), gray.size());
    detail::write_file(path, out);
}

inline void write_ppm(const std::string& path, const RgbImage& img) {
    require_param(img.pixels.size() == 3 * img.height * img.width && img.height > 0,
                  "write_ppm: shape mismatch");
    std::string out =
        "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    detail::put_bytes(out, img.pixels.data(), img.pixels.size());
    detail::write_file(path, out);
}

// 8-bit quantization of a normalized image; values are clamped to [0, 1].
inline std::vector<std::uint8_t> quantize_gray(const IsarImage& img) {
    std::vector<std::uint8_t> gray(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        float v = std::min(1.0f, std::max(0.0f, img.pixels[i]));
        gray[i] = static_cast<std::uint8_t>(std::lround(255.0f * v));
    }
    return gray;
}

// Grayscale input and heatmap joined left-to-right into one raster.
inline RgbImage side_by_side(const std::vector<std::uint8_t>& gray, const RgbImage& heat) {
    require_param(gray.size() == heat.height * heat.width, "side_by_side: size mismatch");
    RgbImage out;
    out.height = heat.height;
    out.width = 2 * heat.width;
    out.pixels.resize(3 * out.height * out.width);
    for (std::size_t y = 0; y < heat.height; ++y) {
        for (std::size_t x = 0; x < heat.width; ++x) {
            std::uint8_t g = gray[y * heat.width + x];
            std::size_t dst = 3 * (y * out.width + x);
            out.pixels[dst] = g;
            out.pixels[dst + 1] = g;
            out.pixels[dst + 2] = g;
            std::size_t src = 3 * (y * heat.width + x);
            std::size_t dst2 = 3 * (y * out.width + heat.width + x);
            out.pixels[dst2] = heat.pixels[src];
            out.pixels[dst2 + 1] = heat.pixels[src + 1];
            out.pixels[dst2 + 2] = heat.pixels[src + 2];
        }
    }
    return out;
}

}  // namespace isarxai
