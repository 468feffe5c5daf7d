// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include <filesystem>

#include "monosplat/io/image_io.hpp"
#include "monosplat/io/ply.hpp"
#include "support/random.hpp"
#include "support/scenes.hpp"

using namespace monosplat;

namespace {

std::filesystem::path temp_file(const std::string &name) {
    return std::filesystem::temp_directory_path() / ("monosplat_io_" + name);
}

} // namespace

TEST(Png, RoundTripOfQuantizedImageIsExact) {
    std::mt19937_64 rng(1);
    const Tensor img = quantize8(tsupport::uniform({7, 5, 3}, rng, 0.0, 1.0));
    const auto path = temp_file("a.png");
    write_png(path, img);
    EXPECT_EQ(read_png(path), img);
    std::filesystem::remove(path);
}

TEST(Png, RejectsWrongShapeAndMissingFile) {
    EXPECT_THROW(write_png(temp_file("bad.png"), Tensor({4, 4})), ShapeError);
    EXPECT_THROW(read_png(temp_file("does_not_exist.png")), FormatError);
}

TEST(Pfm, GrayAndColorRoundTrip) {
    std::mt19937_64 rng(2);
    for (const Shape &shape : {Shape{6, 9}, Shape{4, 3, 3}}) {
        const Tensor map = tsupport::uniform(shape, rng, -50.0, 50.0);
        const auto path = temp_file("m.pfm");
        write_pfm(path, map);
        EXPECT_EQ(read_pfm(path), map);
        const auto bytes = read_file_bytes(path);
        EXPECT_EQ(bytes[0], 'P');
        std::filesystem::remove(path);
    }
}

TEST(Pfm, StoresRowsBottomUpLittleEndian) {
    const Tensor map({2, 1}, std::vector<Real>{1.0f, 2.0f});
    const auto path = temp_file("order.pfm");
    write_pfm(path, map);
    const auto bytes = read_file_bytes(path);
    const std::string header = "Pf\n1 2\n-1.0\n";
    ASSERT_EQ(bytes.size(), header.size() + 8);
    float first;
    std::memcpy(&first, bytes.data() + header.size(), 4);
    EXPECT_EQ(first, 2.0f);
    std::filesystem::remove(path);
}

TEST(Ply, ExportImportExportIsBitwise) {
    const auto g = tsupport::random_gaussians(20, 16, 3);
    const auto bytes = serialize_ply(to_ply_table(g));
    const auto table = parse_ply(bytes);
    EXPECT_EQ(serialize_ply(table), bytes);
    const auto back = from_ply_table(table);
    EXPECT_EQ(to_ply_table(back).values.size(), table.values.size());
    EXPECT_LT(max_abs_diff(back.mu, g.mu), 1e-7f);
    EXPECT_LT(max_abs_diff(back.alpha, g.alpha), 1e-6f);
    EXPECT_LT(max_abs_diff(back.scale, g.scale), 1e-6f);
    EXPECT_LT(max_abs_diff(back.rot, g.rot), 1e-6f);
    EXPECT_EQ(back.sh, g.sh);
}

TEST(Ply, HeaderUsesCommunityLayout) {
    const auto t = to_ply_table(tsupport::random_gaussians(1, 4, 1));
    ASSERT_EQ(t.properties.size(), 3u + 3u + 3u + 9u + 1u + 3u + 4u);
    EXPECT_EQ(t.properties[6], "f_dc_0");
    EXPECT_EQ(t.properties[9], "f_rest_0");
    EXPECT_EQ(t.properties[18], "opacity");
    EXPECT_EQ(t.properties.back(), "rot_3");
}

TEST(Ply, RejectsMalformedFiles) {
    auto bytes = serialize_ply(to_ply_table(tsupport::random_gaussians(3, 1, 2)));
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_THROW(parse_ply(truncated), FormatError);
    const std::string ascii = "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
    EXPECT_THROW(parse_ply(std::vector<std::uint8_t>(ascii.begin(), ascii.end())), FormatError);
    PlyTable t = to_ply_table(tsupport::random_gaussians(2, 1, 2));
    t.properties.erase(t.properties.begin());
    t.values.resize(t.values.size() - 2);
    EXPECT_THROW(from_ply_table(t), FormatError);
}

TEST(Ply, FileRoundTrip) {
    const auto g = tsupport::random_gaussians(5, 9, 4);
    const auto path = temp_file("g.ply");
    write_ply(path, g);
    const auto first = read_file_bytes(path);
    write_file_bytes(path, serialize_ply(parse_ply(first)));
    EXPECT_EQ(read_file_bytes(path), first);
    EXPECT_EQ(read_ply(path).size(), 5);
    std::filesystem::remove(path);
}
