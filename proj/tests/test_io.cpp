#include <gtest/gtest.h>

#include <random>
#include <string>

#include "oracles.hpp"
#include "segcd/ccl.hpp"
#include "segcd/io.hpp"

namespace segcd {
namespace {

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

TEST(Graymap, SinglePixelLabelRasterBytes) {
  const LabelRaster r(1, 1, std::vector<ClassCode>{7});
  Bytes expected = bytes_of("P5\n1 1\n65535\n");
  expected.push_back(0x00);
  expected.push_back(0x07);
  EXPECT_EQ(encode_label_raster(r), expected);
  EXPECT_EQ(decode_label_raster(expected), r);
}

TEST(Graymap, LabelRasterRoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    std::vector<ClassCode> px(16 * 16);
    for (auto& p : px) p = static_cast<ClassCode>(rng());
    const LabelRaster r(16, 16, px);
    const auto bytes = encode_label_raster(r);
    ASSERT_EQ(decode_label_raster(bytes), r);
    ASSERT_EQ(encode_label_raster(decode_label_raster(bytes)), bytes);
  }
}

TEST(Graymap, EightBitRasterReadsAsCodes) {
  Bytes b = bytes_of("P5\n2 1\n255\n");
  b.push_back(3);
  b.push_back(200);
  const auto r = decode_label_raster(b);
  EXPECT_EQ(r.at(0, 0), 3);
  EXPECT_EQ(r.at(1, 0), 200);
}

TEST(Graymap, TruncatedReportsFirstMissingByte) {
  Bytes b = bytes_of("P5\n4 4\n255\n");
  const std::size_t header = b.size();
  for (int i = 0; i < 8; ++i) b.push_back(1);
  try {
    decode_label_raster(b);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    ASSERT_TRUE(e.offset().has_value());
    EXPECT_EQ(*e.offset(), header + 8);
  }
}

TEST(Graymap, MalformedHeaders) {
  EXPECT_THROW(decode_graymap(bytes_of("P6\n1 1\n255\n\x01")), FormatError);
  EXPECT_THROW(decode_graymap(bytes_of("P5\n1 1\n1023\n\x01\x01")), FormatError);
  EXPECT_THROW(decode_graymap(bytes_of("P5\nx 1\n255\n\x01")), FormatError);
  EXPECT_THROW(decode_graymap(bytes_of("P5\n0 1\n255\n")), FormatError);
  EXPECT_THROW(decode_graymap(bytes_of("P5\n1 1\n255\n\x01\x02")), FormatError);
  try {
    decode_graymap(bytes_of("P5\n1 1\n100\n\x01"));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_TRUE(e.offset().has_value());
  }
}

TEST(Graymap, HeaderCommentsAccepted) {
  Bytes b = bytes_of("P5\n# written by hand\n1 1\n255\n");
  b.push_back(255);
  EXPECT_TRUE(decode_change_map(b).at(0, 0));
}

TEST(ChangeMapFile, CanonicalRoundTrip) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const std::size_t w = 1 + rng() % 20, h = 1 + rng() % 20;
    const ChangeMap m(w, h, oracle::random_bits(rng, w * h));
    const auto bytes = encode_change_map(m);
    ASSERT_EQ(decode_change_map(bytes), m);
    ASSERT_EQ(encode_change_map(decode_change_map(bytes)), bytes);
  }
}

TEST(ChangeMapFile, UsesZeroAnd255) {
  const ChangeMap m(2, 1, Bits{1, 0});
  Bytes expected = bytes_of("P5\n2 1\n255\n");
  expected.push_back(255);
  expected.push_back(0);
  EXPECT_EQ(encode_change_map(m), expected);
}

TEST(InstanceMapExport, RejectsIdsAbove16Bits) {
  const InstanceMap ok(2, 1, {1, 65535});
  EXPECT_NO_THROW(encode_instance_map(ok));
  const InstanceMap big(2, 1, {1, 65536});
  EXPECT_THROW(encode_instance_map(big), ExportError);
}

TEST(Legend, ParsesCommentsAndFlags) {
  const auto legend = parse_legend("# code,name,bg\n1,vegetation,1\n\n2, building ,0\r\n3,water,0");
  ASSERT_EQ(legend.entries().size(), 3u);
  EXPECT_TRUE(legend.is_background(1));
  EXPECT_FALSE(legend.is_background(2));
  EXPECT_EQ(legend.find(2)->name, "building");
  EXPECT_EQ(parse_legend(format_legend(legend)), legend);
}

TEST(Legend, Errors) {
  EXPECT_THROW(parse_legend("1,a,1\n1,b,0\n"), FormatError);
  EXPECT_THROW(parse_legend("# only comments\n"), FormatError);
  EXPECT_THROW(parse_legend("1,a,2\n"), FormatError);
  EXPECT_THROW(parse_legend("70000,a,0\n"), FormatError);
  EXPECT_THROW(parse_legend("abc\n"), FormatError);
}

TEST(Legend, CoversRaster) {
  const auto legend = parse_legend("1,a,1\n2,b,0\n");
  EXPECT_NO_THROW(legend.check_covers(LabelRaster(2, 1, std::vector<ClassCode>{1, 2})));
  EXPECT_THROW(legend.check_covers(LabelRaster(2, 1, std::vector<ClassCode>{1, 3})), LegendError);
}

TEST(MaskSetJson, RoundTripAndDefaults) {
  const std::string text = R"({"width":3,"height":2,"masks":[{"id":4,"score":0.5,"runs":[1,2,2,1]},{"id":9,"runs":[6]}]})";
  const auto set = parse_mask_set(text);
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.masks()[0].id(), 4u);
  EXPECT_DOUBLE_EQ(set.masks()[0].score(), 0.5);
  EXPECT_DOUBLE_EQ(set.masks()[1].score(), 1.0);
  EXPECT_EQ(rle_decode(set.masks()[0]), (Bits{0, 1, 1, 0, 0, 1}));
  EXPECT_EQ(parse_mask_set(format_mask_set(set)), set);
}

TEST(MaskSetJson, ErrorsNameTheField) {
  auto message = [](const std::string& text) {
    try {
      parse_mask_set(text);
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(R"({"width":2,"height":2,"masks":[{"id":1,"runs":[3]}]})").find("masks[0].runs"),
            std::string::npos);
  EXPECT_NE(message(R"({"width":2,"height":2,"masks":[{"runs":[4]}]})").find("'id'"), std::string::npos);
  EXPECT_NE(message(R"({"width":2,"height":2,"masks":[{"id":1,"runs":[4]},{"id":1,"runs":[4]}]})")
                .find("duplicate"),
            std::string::npos);
  EXPECT_NE(message(R"({"width":2,"height":2,"masks":[}")").find("byte offset"), std::string::npos);
  EXPECT_NE(message(R"({"height":2,"masks":[]})").find("width"), std::string::npos);
}

TEST(InstancesJson, RoundTrip) {
  const LabelRaster r(4, 2, std::vector<ClassCode>{1, 1, 2, 2, 1, 1, 2, 2});
  CclParams p;
  p.min_area = 1;
  const auto res = label_components(r, p);
  const auto text = format_instances(r.extent(), res.instances);
  const auto back = parse_instances(text);
  EXPECT_EQ(back.extent, r.extent());
  ASSERT_EQ(back.instances.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.instances[i].id, res.instances[i].id);
    EXPECT_EQ(back.instances[i].class_code, res.instances[i].class_code);
    EXPECT_EQ(back.instances[i].mask, res.instances[i].mask);
    EXPECT_EQ(back.instances[i].bbox, res.instances[i].bbox);
  }
  EXPECT_EQ(format_instances(back.extent, back.instances), text);
}

TEST(InstancesJson, AreaMustMatchRuns) {
  EXPECT_THROW(parse_instances(R"({"width":2,"height":1,"instances":[{"id":1,"class_code":1,"area":2,"runs":[1,1]}]})"),
               FormatError);
  EXPECT_THROW(parse_instances(R"({"width":2,"height":1,"instances":[{"id":1,"class_code":1,"runs":[2]}]})"),
               FormatError);
}

TEST(PromptsJson, RoundTrip) {
  const Extent e{4, 4};
  PromptSpec p{3, 1, {1, 1, 2, 2}, box_mask(e, {1, 1, 2, 2}, 3)};
  const std::vector<PromptSpec> prompts{p};
  const auto text = format_prompts(prompts);
  EXPECT_EQ(text, "[{\"box\":[1,1,2,2],\"class_code\":1,\"instance_id\":3,\"runs\":[5,2,2,2,5]}]\n");
  const auto back = parse_prompts(text, e);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].prompt_box, p.prompt_box);
  EXPECT_TRUE(back[0].prompt_mask.same_pixels(p.prompt_mask));
}

TEST(PromptedResultsJson, RoundTrip) {
  const Extent e{3, 2};
  const std::vector<PromptedResult> results{{5, BinaryMask::from_runs(3, 2, {1, 2, 2, 1}, 5)}};
  const auto text = format_prompted_results(e, results);
  const auto back = parse_prompted_results(text);
  EXPECT_EQ(back.extent, e);
  ASSERT_EQ(back.results.size(), 1u);
  EXPECT_EQ(back.results[0].instance_id, 5u);
  EXPECT_TRUE(back.results[0].segmented.same_pixels(results[0].segmented));
  EXPECT_THROW(parse_prompted_results(R"({"width":3,"height":2,"results":[{"instance_id":1,"runs":[5]}]})"),
               FormatError);
}

TEST(VerdictsCsv, Format) {
  InstanceVerdict a;
  a.instance_id = 1;
  a.changed = false;
  a.best_overlap = 1.0;
  a.masks_used = {4, 5};
  InstanceVerdict b;
  b.instance_id = 2;
  b.changed = true;
  b.best_overlap = 1.0 / 3.0;
  const std::vector<InstanceVerdict> v{a, b};
  EXPECT_EQ(format_verdicts_csv(v),
            "instance_id,changed,best_overlap,n_masks_used\n1,0,1.000000,2\n2,1,0.333333,0\n");
}

TEST(Overlay, PaintsChangedPixels) {
  Graymap base{2, 1, 255, {0, 255}};
  const ChangeMap change(2, 1, Bits{1, 0});
  const auto bytes = encode_overlay(base, change, {255, 0, 0});
  const std::string header = "P6\n2 1\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 6);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + header.size()), header);
  const Bytes px(bytes.begin() + header.size(), bytes.end());
  EXPECT_EQ(px, (Bytes{255, 0, 0, 255, 255, 255}));
}

}  // namespace
}  // namespace segcd
