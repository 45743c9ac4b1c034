// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/tensor_io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lavish {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_le64(std::vector<unsigned char>& out, std::uint64_t bits) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

std::uint64_t get_le64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

fs::path manifest_path(const fs::path& path) {
    if (path.extension() == ".json") return path;
    fs::path p = path;
    p += ".json";
    return p;
}

fs::path blob_path_for(const fs::path& stem) {
    fs::path p = stem;
    if (p.extension() == ".json") p.replace_extension();
    p += ".bin";
    return p;
}

}  // namespace

const NamedTensor* TensorFile::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

fs::path save_tensor_file(const fs::path& stem, const TensorFile& file) {
    const fs::path mpath = manifest_path(stem);
    const fs::path bpath = blob_path_for(stem);
    if (mpath.has_parent_path()) fs::create_directories(mpath.parent_path());
    std::vector<unsigned char> blob;
    json entries = json::array();
    std::size_t offset = 0;
    for (const auto& t : file.tensors) {
        const auto values = t.tensor.data();
        for (double v : values) put_le64(blob, std::bit_cast<std::uint64_t>(v));
        entries.push_back({{"name", t.name},
                           {"shape", t.tensor.shape()},
                           {"frozen", t.frozen},
                           {"offset", offset},
                           {"count", values.size()}});
        offset += values.size();
    }
    const json manifest = {{"format", "lavish-tensors"}, {"version", 1},     {"dtype", "float64"},
                           {"byte_order", "little"},    {"blob", bpath.filename().string()},
                           {"meta", file.meta},         {"tensors", entries}};
    {
        std::ofstream out(bpath, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + bpath.string());
        out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    }
    std::ofstream out(mpath, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + mpath.string());
    out << manifest.dump(2) << '\n';
    return mpath;
}

TensorFile load_tensor_file(const fs::path& path) {
    const fs::path mpath = manifest_path(path);
    std::ifstream in(mpath);
    if (!in) throw std::runtime_error("cannot read " + mpath.string());
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(mpath.string() + ": invalid JSON: " + e.what());
    }
    if (manifest.value("format", "") != "lavish-tensors") throw std::runtime_error(mpath.string() + ": not a lavish tensor manifest");
    if (manifest.value("dtype", "") != "float64" || manifest.value("byte_order", "") != "little") {
        throw std::runtime_error(mpath.string() + ": only little-endian float64 is supported");
    }
    const fs::path bpath = mpath.parent_path() / manifest.at("blob").get<std::string>();
    std::ifstream bin(bpath, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + bpath.string());
    const std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    if (blob.size() % 8 != 0) throw std::runtime_error(bpath.string() + ": blob size is not a multiple of 8");
    const std::size_t available = blob.size() / 8;

    TensorFile file;
    file.meta = manifest.value("meta", json::object());
    for (const auto& e : manifest.at("tensors")) {
        const std::string name = e.at("name").get<std::string>();
        const Shape shape = e.at("shape").get<Shape>();
        const std::size_t offset = e.at("offset").get<std::size_t>();
        const std::size_t count = e.at("count").get<std::size_t>();
        if (shape_numel(shape) != count) throw std::runtime_error(name + ": shape does not match element count");
        if (offset + count > available) throw std::runtime_error(name + ": extends past the end of the blob");
        std::vector<double> values(count);
        for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<double>(get_le64(blob.data() + 8 * (offset + i)));
        file.tensors.push_back({name, Tensor::from(shape, std::move(values)), e.value("frozen", true)});
    }
    return file;
}

TensorFile registry_to_file(const FreezeRegistry& reg) {
    TensorFile f;
    for (const auto& e : reg.entries()) f.tensors.push_back({e.name, e.tensor, e.frozen});
    return f;
}

void load_into_registry(const FreezeRegistry& reg, const TensorFile& file) {
    if (file.tensors.size() != reg.size()) {
        throw std::runtime_error("weight file has " + std::to_string(file.tensors.size()) + " tensors, model expects " +
                                 std::to_string(reg.size()));
    }
    for (const auto& e : reg.entries()) {
        const NamedTensor* t = file.find(e.name);
        if (t == nullptr) throw std::runtime_error("weight file is missing '" + e.name + "'");
        if (t->tensor.shape() != e.tensor.shape()) {
            throw std::runtime_error("'" + e.name + "' has shape " + shape_to_string(t->tensor.shape()) + ", model expects " +
                                     shape_to_string(e.tensor.shape()));
        }
        if (t->frozen != e.frozen) throw std::runtime_error("'" + e.name + "' has a mismatched frozen flag");
    }
    for (const auto& e : reg.entries()) {
        Tensor dst = e.tensor;
        const auto src = file.find(e.name)->tensor.data();
        std::copy(src.begin(), src.end(), dst.mutable_data().begin());
    }
}

std::vector<unsigned char> serialize_frozen(const FreezeRegistry& reg) {
    std::vector<unsigned char> out;
    for (const auto& e : reg.entries()) {
        if (!e.frozen) continue;
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.push_back(0);
        put_le64(out, e.tensor.shape().size());
        for (std::size_t dim : e.tensor.shape()) put_le64(out, dim);
        for (double v : e.tensor.data()) put_le64(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

std::string sha256_hex(const std::vector<unsigned char>& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string frozen_fingerprint(const FreezeRegistry& reg) { return sha256_hex(serialize_frozen(reg)); }

std::vector<std::vector<double>> read_csv_matrix(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t')) ++used;
            if (used == 0 || used != cell.size()) throw std::runtime_error(path.string() + ": invalid number '" + cell + "'");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) throw std::runtime_error(path.string() + ": ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path.string() + ": no data");
    return rows;
}

ImageInput load_image(const fs::path& path) {
    ImageInput img;
    if (path.extension() == ".csv") {
        const auto rows = read_csv_matrix(path);
        if (rows.front().size() % 3 != 0) throw std::runtime_error(path.string() + ": image rows must hold RGB triples");
        img.height = rows.size();
        img.width = rows.front().size() / 3;
        for (const auto& r : rows) img.pixels.insert(img.pixels.end(), r.begin(), r.end());
        return img;
    }
    const TensorFile f = load_tensor_file(path);
    const NamedTensor* t = f.find("image");
    if (t == nullptr || t->tensor.rank() != 3 || t->tensor.shape()[2] != 3) {
        throw std::runtime_error(path.string() + ": expected a tensor 'image' of shape {H, W, 3}");
    }
    img.height = t->tensor.shape()[0];
    img.width = t->tensor.shape()[1];
    img.pixels.assign(t->tensor.data().begin(), t->tensor.data().end());
    return img;
}

SpectrogramInput load_spectrogram(const fs::path& path) {
    SpectrogramInput spec;
    if (path.extension() == ".csv") {
        const auto rows = read_csv_matrix(path);
        spec.time_bins = rows.size();
        spec.freq_bins = rows.front().size();
        for (const auto& r : rows) spec.values.insert(spec.values.end(), r.begin(), r.end());
        return spec;
    }
    const TensorFile f = load_tensor_file(path);
    const NamedTensor* t = f.find("spectrogram");
    if (t == nullptr || t->tensor.rank() != 2) throw std::runtime_error(path.string() + ": expected a tensor 'spectrogram' of shape {M, C}");
    spec.time_bins = t->tensor.shape()[0];
    spec.freq_bins = t->tensor.shape()[1];
    spec.values.assign(t->tensor.data().begin(), t->tensor.data().end());
    return spec;
}

void save_image(const fs::path& stem, const ImageInput& img) {
    TensorFile f;
    f.tensors.push_back({"image", Tensor::from({img.height, img.width, 3}, img.pixels), true});
    save_tensor_file(stem, f);
}

void save_spectrogram(const fs::path& stem, const SpectrogramInput& spec) {
    TensorFile f;
    f.tensors.push_back({"spectrogram", Tensor::from({spec.time_bins, spec.freq_bins}, spec.values), true});
    save_tensor_file(stem, f);
}

}  // namespace lavish
