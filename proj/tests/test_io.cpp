#include <semfm/io.hpp>
#include <semfm/primitives.hpp>

#include <gtest/gtest.h>

#include <fstream>

#include "test_util.hpp"

using namespace semfm;
using namespace semfm::io;

namespace {

LiftedSampleSet random_set(int n, int d)
{
    LiftedSampleSet s;
    s.positions = Matrix::Random(n, 3);
    s.embeddings = Matrix::Random(n, d);
    return s;
}

} // namespace

TEST(Io, SamplesRoundTripBothForms)
{
    const std::string dir = test::temp_dir("io_samples");
    const LiftedSampleSet s = random_set(57, 9);
    for (const char* name : {"/s.json", "/s.bin", "/s.JSON"}) {
        save_samples(dir + name, s);
        const LiftedSampleSet back = load_samples(dir + name);
        EXPECT_EQ(back.positions, s.positions) << name;
        EXPECT_EQ(back.embeddings, s.embeddings) << name;
    }
}

TEST(Io, BinarySamplesRejectGarbageAndTruncation)
{
    const std::string dir = test::temp_dir("io_bad");
    write_text(dir + "/junk.bin", "not a sample file at all");
    EXPECT_THROW(load_samples(dir + "/junk.bin"), ParseError);
    save_samples(dir + "/s.bin", random_set(10, 4));
    const std::string full = read_text(dir + "/s.bin");
    write_text(dir + "/cut.bin", full.substr(0, full.size() - 8));
    EXPECT_THROW(load_samples(dir + "/cut.bin"), ParseError);
    EXPECT_THROW(load_samples(dir + "/missing.bin"), IoError);
}

TEST(Io, SamplesJsonShapeErrors)
{
    EXPECT_THROW(samples_from_json(parse_json(R"({"dim": 2, "samples": []})", "x"), "x"), ParseError);
    EXPECT_THROW(samples_from_json(parse_json(R"({"d": 2, "samples": [{"p": [0, 0], "e": [1, 2]}]})", "x"), "x"),
                 ArgumentError);
    EXPECT_THROW(samples_from_json(parse_json(R"({"d": 2, "samples": [{"p": [0, 0, 0], "e": [1]}]})", "x"), "x"),
                 ArgumentError);
    EXPECT_THROW(parse_json("{", "x.json"), ParseError);
}

TEST(Io, FmapAndPointwiseRoundTrip)
{
    FunctionalMap fm;
    fm.C = Matrix::Random(6, 6);
    fm.alpha = 2;
    fm.reg_weight = 0.125;
    fm.trace = {4, 6};
    const FunctionalMap back = fmap_from_json(parse_json(fmap_to_json(fm).dump(), "f"), "f");
    EXPECT_EQ(back.C, fm.C);
    EXPECT_EQ(back.alpha, 2);
    EXPECT_EQ(back.reg_weight, 0.125);
    EXPECT_EQ(back.trace, fm.trace);
    EXPECT_THROW(fmap_from_json(parse_json(R"({"k": 2, "C": [[1, 0]]})", "f"), "f"), ParseError);

    const PointwiseMap T{{3, 1, 2, 0}};
    EXPECT_EQ(pointwise_from_json(pointwise_to_json(T), "p").target, T.target);
    EXPECT_THROW(pointwise_from_json(Json::object(), "p"), ParseError);
}

TEST(Io, RegionRoundTripAndDefaultId)
{
    const std::string dir = test::temp_dir("io_region");
    write_json(dir + "/r.json", region_to_json(AffordanceRegion("a", {4, 2})));
    const AffordanceRegion r = load_region(dir + "/r.json", 10, "other");
    EXPECT_EQ(r.mesh_id(), "a");
    EXPECT_EQ(r.vertices(), (std::vector<int>{2, 4}));
    write_text(dir + "/bare.json", R"({"vertices": [1]})");
    EXPECT_EQ(load_region(dir + "/bare.json", 10, "other").mesh_id(), "other");
    EXPECT_THROW(load_region(dir + "/r.json", 3, "a"), ArgumentError);
}

TEST(Io, ManifestRoundTrip)
{
    const std::string dir = test::temp_dir("io_manifest");
    Manifest m;
    m.base = "handle-tool";
    m.seed = 7;
    m.spec = Json{{"N", 2}};
    m.correspondence = "identity";
    m.objects = {{"a", "a.off", "a.samples.json", "a.affordance.json"},
                 {"b", "b.off", "b.samples.bin", "b.affordance.json"}};
    write_json(dir + "/manifest.json", manifest_to_json(m));
    const Manifest back = load_manifest(dir + "/manifest.json");
    EXPECT_EQ(back.base, "handle-tool");
    EXPECT_EQ(back.seed, 7u);
    EXPECT_EQ(back.correspondence, "identity");
    ASSERT_EQ(back.objects.size(), 2u);
    EXPECT_EQ(back.objects[1].samples, "b.samples.bin");
    EXPECT_EQ(back.objects[1].affordance, "b.affordance.json");
    EXPECT_EQ(back.resolve("a.off"), (std::filesystem::path(dir) / "a.off").string());
}

TEST(Io, IncompleteManifestIsArgumentError)
{
    const std::string dir = test::temp_dir("io_manifest_bad");
    write_text(dir + "/m1.json", R"({"objects": [{"id": "a", "mesh": "a.off", "samples": "a.json"},
                                                 {"id": "b", "mesh": "b.off", "samples": "b.json"}],
                                     "gt_affordances": [{"id": "a", "path": "a.aff.json"}]})");
    EXPECT_THROW(load_manifest(dir + "/m1.json"), ArgumentError);
    write_text(dir + "/m2.json", R"({"objects": [{"id": "a", "mesh": "a.off"}], "gt_affordances": []})");
    EXPECT_THROW(load_manifest(dir + "/m2.json"), ArgumentError);
    write_text(dir + "/m3.json", R"({"objects": [], "gt_affordances": []})");
    EXPECT_THROW(load_manifest(dir + "/m3.json"), ArgumentError);
}

TEST(Io, ReportFieldsAndNullIou)
{
    TransferReport r;
    r.source = "a";
    r.target = "b";
    const Json j = report_to_json(r);
    EXPECT_TRUE(j["iou"].is_null());
    EXPECT_EQ(j["method"], "semfm");
    r.iou = 0.5;
    EXPECT_EQ(report_to_json(r)["iou"], 0.5);
}
