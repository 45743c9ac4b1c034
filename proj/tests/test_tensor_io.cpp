// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include "lavish/model.hpp"
#include "lavish/tensor_io.hpp"
#include "test_util.hpp"

namespace lavish {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("lavish_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream(dir_ / name, std::ios::binary) << text;
    }

    fs::path dir_;
};

using TensorFileIo = TempDir;
using InputIo = TempDir;

ModelConfig tiny() {
    ModelConfig mc;
    mc.backbone.width = 16;
    mc.backbone.heads = 2;
    mc.backbone.layers = 1;
    mc.adapter.site.reduction = 4;
    return mc;
}

TEST_F(TensorFileIo, RoundTripIsBitExact) {
    TensorFile f;
    f.tensors.push_back({"a", Tensor::from({2, 3}, {1.0, -0.0, 1e-308, 3.5, -2.25, 0.1}), true});
    f.tensors.push_back({"b", Tensor::from({1}, {std::numeric_limits<double>::max()}), false});
    f.meta = {{"note", "x"}};
    const fs::path manifest = save_tensor_file(dir_ / "t", f);
    EXPECT_EQ(manifest, dir_ / "t.json");
    const TensorFile back = load_tensor_file(dir_ / "t");
    ASSERT_EQ(back.tensors.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back.tensors[i].name, f.tensors[i].name);
        EXPECT_EQ(back.tensors[i].frozen, f.tensors[i].frozen);
        EXPECT_EQ(back.tensors[i].tensor.shape(), f.tensors[i].tensor.shape());
        const auto x = back.tensors[i].tensor.data(), y = f.tensors[i].tensor.data();
        for (std::size_t j = 0; j < x.size(); ++j)
            EXPECT_EQ(std::bit_cast<std::uint64_t>(x[j]), std::bit_cast<std::uint64_t>(y[j]));
    }
    EXPECT_EQ(back.meta, f.meta);
    EXPECT_EQ(load_tensor_file(manifest).tensors.size(), 2u);
}

TEST_F(TensorFileIo, RejectsCorruptFiles) {
    TensorFile f;
    f.tensors.push_back({"a", Tensor::from({4}, {1, 2, 3, 4}), true});
    save_tensor_file(dir_ / "t", f);
    fs::resize_file(dir_ / "t.bin", 16);
    EXPECT_THROW(load_tensor_file(dir_ / "t"), std::runtime_error);
    fs::resize_file(dir_ / "t.bin", 13);
    EXPECT_THROW(load_tensor_file(dir_ / "t"), std::runtime_error);
    write("bad.json", "{not json");
    EXPECT_THROW(load_tensor_file(dir_ / "bad.json"), std::runtime_error);
    write("other.json", R"({"format": "something-else"})");
    EXPECT_THROW(load_tensor_file(dir_ / "other.json"), std::runtime_error);
    EXPECT_THROW(load_tensor_file(dir_ / "missing"), std::runtime_error);
}

TEST_F(TensorFileIo, RegistryRoundTripAndMismatchChecks) {
    const LavishModel a(tiny(), 1);
    const LavishModel b(tiny(), 2);
    ASSERT_NE(frozen_fingerprint(a.registry()), frozen_fingerprint(b.registry()));
    save_tensor_file(dir_ / "w", registry_to_file(a.registry()));
    load_into_registry(b.registry(), load_tensor_file(dir_ / "w"));
    EXPECT_EQ(frozen_fingerprint(a.registry()), frozen_fingerprint(b.registry()));
    for (std::size_t i = 0; i < a.registry().size(); ++i) {
        const auto x = a.registry().entries()[i].tensor.data(), y = b.registry().entries()[i].tensor.data();
        EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
    }

    TensorFile wrong = registry_to_file(a.registry());
    wrong.tensors.pop_back();
    EXPECT_THROW(load_into_registry(b.registry(), wrong), std::runtime_error);
    wrong = registry_to_file(a.registry());
    wrong.tensors.front().frozen = !wrong.tensors.front().frozen;
    EXPECT_THROW(load_into_registry(b.registry(), wrong), std::runtime_error);
    wrong = registry_to_file(a.registry());
    wrong.tensors.front().tensor = Tensor::zeros({1});
    EXPECT_THROW(load_into_registry(b.registry(), wrong), std::runtime_error);
}

TEST(Fingerprint, KnownSha256) {
    EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex({abc.begin(), abc.end()}), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Fingerprint, CoversOnlyFrozenTensors) {
    const LavishModel m(tiny(), 3);
    const std::string before = frozen_fingerprint(m.registry());
    Tensor gate = m.registry().find("adapter.layer0.a2v_mha.fusion.gate")->tensor;
    gate.mutable_data()[0] = 0.5;
    EXPECT_EQ(frozen_fingerprint(m.registry()), before);
    Tensor w = m.registry().frozen().front().tensor;
    w.mutable_data()[0] += 1e-12;
    EXPECT_NE(frozen_fingerprint(m.registry()), before);
}

TEST_F(InputIo, ImageCsvAndBinaryAgree) {
    write("img.csv", "0.1,0.2,0.3,0.4,0.5,0.6\n0.7,0.8,0.9,1,0,0.5\n");
    const ImageInput img = load_image(dir_ / "img.csv");
    EXPECT_EQ(img.height, 2u);
    EXPECT_EQ(img.width, 2u);
    EXPECT_EQ(img.at(1, 0, 2), 0.9);
    save_image(dir_ / "img", img);
    EXPECT_EQ(load_image(dir_ / "img.json").pixels, img.pixels);
    write("ragged.csv", "1,2,3\n1,2\n");
    EXPECT_THROW(load_image(dir_ / "ragged.csv"), std::runtime_error);
    write("notrgb.csv", "1,2\n");
    EXPECT_THROW(load_image(dir_ / "notrgb.csv"), std::runtime_error);
}

TEST_F(InputIo, SpectrogramCsvAndBinaryAgree) {
    write("spec.csv", "1,2,3\r\n4,5,6\r\n");
    const SpectrogramInput s = load_spectrogram(dir_ / "spec.csv");
    EXPECT_EQ(s.time_bins, 2u);
    EXPECT_EQ(s.freq_bins, 3u);
    EXPECT_EQ(s.at(1, 2), 6.0);
    save_spectrogram(dir_ / "spec", s);
    EXPECT_EQ(load_spectrogram(dir_ / "spec").values, s.values);
    write("junk.csv", "1,2x,3\n");
    EXPECT_THROW(load_spectrogram(dir_ / "junk.csv"), std::runtime_error);
    write("empty.csv", "");
    EXPECT_THROW(load_spectrogram(dir_ / "empty.csv"), std::runtime_error);
}

}  // namespace
}  // namespace lavish
