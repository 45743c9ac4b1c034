// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Named-tensor container: "<stem>.json" manifest plus "<stem>.bin" blob of
// little-endian float64 values. Manifest layout:
//
//   {"format": "lavish-tensors", "version": 1, "dtype": "float64",
//    "byte_order": "little", "blob": "<stem>.bin", "meta": {...},
//    "tensors": [{"name": ..., "shape": [...], "frozen": bool,
//                 "offset": <elements>, "count": <elements>}, ...]}
//
// The same container stores single input arrays (images H x W x 3,
// spectrograms M x C) and exported datasets.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lavish/backbone.hpp"

namespace lavish {

struct NamedTensor {
    std::string name;
    Tensor tensor;
    bool frozen = true;
};

struct TensorFile {
    std::vector<NamedTensor> tensors;
    nlohmann::json meta = nlohmann::json::object();

    const NamedTensor* find(const std::string& name) const;
};

// Writes <stem>.json and <stem>.bin; returns the manifest path.
std::filesystem::path save_tensor_file(const std::filesystem::path& stem, const TensorFile& file);
// Accepts either the stem or the manifest path.
TensorFile load_tensor_file(const std::filesystem::path& path);

// Registry entries as a tensor file (frozen flags preserved).
TensorFile registry_to_file(const FreezeRegistry& reg);
// Copies values into the registry after checking that names, shapes and
// frozen flags match exactly; throws std::runtime_error on any mismatch.
void load_into_registry(const FreezeRegistry& reg, const TensorFile& file);

// Raw bytes of the frozen entries (name, shape, little-endian values) in
// registration order, and their SHA-256 as lowercase hex.
std::vector<unsigned char> serialize_frozen(const FreezeRegistry& reg);
std::string sha256_hex(const std::vector<unsigned char>& bytes);
std::string frozen_fingerprint(const FreezeRegistry& reg);

// Single-array inputs. Binary form: a tensor file holding one tensor named
// "image" ({H, W, 3}) or "spectrogram" ({M, C}). CSV form: one row per image
// row or time bin; image rows list R,G,B triples.
ImageInput load_image(const std::filesystem::path& path);
SpectrogramInput load_spectrogram(const std::filesystem::path& path);
void save_image(const std::filesystem::path& stem, const ImageInput& img);
void save_spectrogram(const std::filesystem::path& stem, const SpectrogramInput& spec);
std::vector<std::vector<double>> read_csv_matrix(const std::filesystem::path& path);

}  // namespace lavish
