#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "isarxai/io.hpp"
#include "isarxai/rng.hpp"

using namespace isarxai;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed on destruction.
struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("isarxai_io_" + std::to_string(Catch::rngSeed()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

StoredDataset sample_dataset() {
    StoredDataset ds;
    ds.height = 4;
    ds.width = 5;
    ds.class_names = {"cone", "cone, finned", "plate \"flat\""};
    Rng rng(99);
    for (int i = 0; i < 6; ++i) {
        ds.class_ids.push_back(i % 3);
        ds.initial_angles.push_back(rng.uniform() * 6.28);
        ds.bandwidths.push_back(4e9 + 1e9 * rng.uniform());
        for (size_t k = 0; k < ds.height * ds.width; ++k)
            ds.pixels.push_back(static_cast<float>(rng.normal()));
    }
    return ds;
}

NetworkSpec small_spec() {
    NetworkSpec spec;
    spec.input_h = 8;
    spec.input_w = 8;
    spec.conv_channels = {4, 6};
    spec.fc_widths = {10, 3};
    return spec;
}

}  // namespace

TEST_CASE("dataset files round-trip bit-exactly") {
    TempDir tmp;
    StoredDataset ds = sample_dataset();
    // one value that exercises NaN payload preservation
    ds.pixels[7] = std::numeric_limits<float>::quiet_NaN();
    std::string path = tmp.file("sample.ds");
    write_dataset(path, ds);

    StoredDataset back = read_dataset(path);
    REQUIRE(back.height == ds.height);
    REQUIRE(back.width == ds.width);
    REQUIRE(back.class_names == ds.class_names);
    REQUIRE(back.class_ids == ds.class_ids);
    REQUIRE(back.initial_angles == ds.initial_angles);
    REQUIRE(back.bandwidths == ds.bandwidths);
    REQUIRE(back.pixels.size() == ds.pixels.size());
    for (size_t i = 0; i < ds.pixels.size(); ++i)
        REQUIRE(std::bit_cast<uint32_t>(back.pixels[i]) == std::bit_cast<uint32_t>(ds.pixels[i]));

    // serializing the reread structure reproduces the file byte for byte
    REQUIRE(serialize_dataset(back) == serialize_dataset(ds));
    REQUIRE(detail::read_file(path) == serialize_dataset(ds));
}

TEST_CASE("dataset header is little-endian with a fixed magic") {
    StoredDataset ds;
    ds.height = 2;
    ds.width = 3;
    ds.class_names = {"a"};
    ds.class_ids = {1};
    ds.initial_angles = {0.0};
    ds.bandwidths = {0.0};
    ds.pixels.assign(6, 0.0f);
    std::string bytes = serialize_dataset(ds);
    REQUIRE(bytes.substr(0, 7) == "ISARDS1");
    // version 1, count 1, height 2, width 3, one class name
    const std::string header = std::string("\x01\x00\x00\x00", 4) +
                               std::string("\x01\x00\x00\x00\x00\x00\x00\x00", 8) +
                               std::string("\x02\x00\x00\x00", 4) +
                               std::string("\x03\x00\x00\x00", 4) +
                               std::string("\x01\x00\x00\x00", 4) +
                               std::string("\x01\x00\x00\x00", 4) + "a";
    REQUIRE(bytes.substr(7, header.size()) == header);
    // item: class_id 1, two zero doubles, six zero floats
    REQUIRE(bytes.size() == 7 + header.size() + 4 + 16 + 24);
}

TEST_CASE("dataset reader rejects malformed files") {
    TempDir tmp;
    StoredDataset ds = sample_dataset();
    std::string good = serialize_dataset(ds);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    detail::write_file(tmp.file("magic.ds"), bad_magic);
    REQUIRE_THROWS_AS(read_dataset(tmp.file("magic.ds")), IoError);

    std::string bad_version = good;
    bad_version[7] = 2;
    detail::write_file(tmp.file("version.ds"), bad_version);
    REQUIRE_THROWS_AS(read_dataset(tmp.file("version.ds")), IoError);

    detail::write_file(tmp.file("trunc.ds"), good.substr(0, good.size() - 3));
    REQUIRE_THROWS_AS(read_dataset(tmp.file("trunc.ds")), IoError);

    detail::write_file(tmp.file("extra.ds"), good + "xyz");
    REQUIRE_THROWS_AS(read_dataset(tmp.file("extra.ds")), IoError);

    REQUIRE_THROWS_AS(read_dataset(tmp.file("missing.ds")), IoError);

    StoredDataset ragged = ds;
    ragged.bandwidths.pop_back();
    REQUIRE_THROWS_AS(serialize_dataset(ragged), ParameterError);
}

TEST_CASE("checkpoints restore weights, seed, and epoch exactly") {
    TempDir tmp;
    Checkpoint ck;
    ck.net = initialize_network<float>(small_spec(), 21);
    ck.net.fc[1].b.data[0] = -0.125f;
    ck.training_seed = 0xDEADBEEFCAFE1234ull;
    ck.epoch = 37;
    std::string path = tmp.file("model.ck");
    write_checkpoint(path, ck);

    Checkpoint back = read_checkpoint(path);
    REQUIRE(back.training_seed == ck.training_seed);
    REQUIRE(back.epoch == ck.epoch);
    REQUIRE(back.net.spec.input_h == ck.net.spec.input_h);
    REQUIRE(back.net.spec.conv_channels == ck.net.spec.conv_channels);
    REQUIRE(back.net.spec.fc_widths == ck.net.spec.fc_widths);
    auto ta = ck.net.tensors();
    auto tb = back.net.tensors();
    REQUIRE(ta.size() == tb.size());
    for (size_t i = 0; i < ta.size(); ++i) {
        REQUIRE(ta[i]->shape == tb[i]->shape);
        REQUIRE(ta[i]->data == tb[i]->data);
    }
    REQUIRE(serialize_checkpoint(back) == serialize_checkpoint(ck));
}

TEST_CASE("checkpoint reader rejects malformed files") {
    TempDir tmp;
    Checkpoint ck;
    ck.net = initialize_network<float>(small_spec(), 5);
    std::string good = serialize_checkpoint(ck);

    std::string bad_magic = good;
    bad_magic[3] = '?';
    detail::write_file(tmp.file("magic.ck"), bad_magic);
    REQUIRE_THROWS_AS(read_checkpoint(tmp.file("magic.ck")), IoError);

    detail::write_file(tmp.file("trunc.ck"), good.substr(0, good.size() / 2));
    REQUIRE_THROWS_AS(read_checkpoint(tmp.file("trunc.ck")), IoError);

    detail::write_file(tmp.file("extra.ck"), good + "!");
    REQUIRE_THROWS_AS(read_checkpoint(tmp.file("extra.ck")), IoError);

    // header declaring an input size the pooling chain cannot divide
    std::string bad_shape = good;
    bad_shape[11] = 9;  // input_h low byte
    detail::write_file(tmp.file("shape.ck"), bad_shape);
    REQUIRE_THROWS_AS(read_checkpoint(tmp.file("shape.ck")), IoError);
}

TEST_CASE("csv writer applies RFC-4180 quoting") {
    CsvTable t;
    t.header = {"name", "value", "note"};
    t.rows.push_back({"plain", "1", "no quoting"});
    t.rows.push_back({"comma,inside", "2", "quote\"inside"});
    t.rows.push_back({"line\nbreak", "3", ""});
    std::string text = to_csv(t);
    REQUIRE(text ==
            "name,value,note\n"
            "plain,1,no quoting\n"
            "\"comma,inside\",2,\"quote\"\"inside\"\n"
            "\"line\nbreak\",3,\n");

    CsvTable back = parse_csv(text);
    REQUIRE(back.header == t.header);
    REQUIRE(back.rows == t.rows);

    CsvTable empty;
    REQUIRE_THROWS_AS(to_csv(empty), ParameterError);
    CsvTable ragged = t;
    ragged.rows.push_back({"too", "short"});
    REQUIRE_THROWS_AS(to_csv(ragged), ParameterError);
}

TEST_CASE("csv parser accepts CRLF endings and rejects open quotes") {
    CsvTable t = parse_csv("a,b\r\n1,\"x,y\"\r\n2,z\r\n");
    REQUIRE(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    REQUIRE(t.rows[0] == std::vector<std::string>{"1", "x,y"});
    REQUIRE(t.rows[1] == std::vector<std::string>{"2", "z"});

    // missing trailing newline still yields the final row
    CsvTable u = parse_csv("h\nv");
    REQUIRE(u.rows == std::vector<std::vector<std::string>>{{"v"}});

    REQUIRE_THROWS_AS(parse_csv("a\n\"open"), IoError);
    REQUIRE_THROWS_AS(parse_csv(""), IoError);

    TempDir tmp;
    write_csv(tmp.file("t.csv"), t);
    CsvTable back = read_csv(tmp.file("t.csv"));
    REQUIRE(back.header == t.header);
    REQUIRE(back.rows == t.rows);
}

TEST_CASE("pgm and ppm files carry exact headers and payloads") {
    TempDir tmp;
    std::vector<uint8_t> gray = {0, 64, 128, 255, 17, 34};
    write_pgm(tmp.file("g.pgm"), gray, 2, 3);
    std::string pgm = detail::read_file(tmp.file("g.pgm"));
    REQUIRE(pgm.substr(0, 9) == "P5\n3 2\n25");
    REQUIRE(pgm == std::string("P5\n3 2\n255\n") +
                       std::string(reinterpret_cast<const char*>(gray.data()), gray.size()));

    RgbImage img;
    img.height = 1;
    img.width = 2;
    img.pixels = {255, 0, 0, 0, 0, 255};
    write_ppm(tmp.file("c.ppm"), img);
    std::string ppm = detail::read_file(tmp.file("c.ppm"));
    REQUIRE(ppm == std::string("P6\n2 1\n255\n") +
                       std::string(reinterpret_cast<const char*>(img.pixels.data()),
                                   img.pixels.size()));

    REQUIRE_THROWS_AS(write_pgm(tmp.file("bad.pgm"), gray, 4, 3), ParameterError);
    RgbImage short_img = img;
    short_img.pixels.pop_back();
    REQUIRE_THROWS_AS(write_ppm(tmp.file("bad.ppm"), short_img), ParameterError);
}

TEST_CASE("gray quantization clamps and rounds") {
    IsarImage img;
    img.height = 1;
    img.width = 5;
    img.pixels = {-0.5f, 0.0f, 0.5f, 1.0f, 2.0f};
    std::vector<uint8_t> g = quantize_gray(img);
    REQUIRE(g == std::vector<uint8_t>{0, 0, 128, 255, 255});
}

TEST_CASE("side-by-side composition places gray left and color right") {
    std::vector<uint8_t> gray = {10, 20};
    RgbImage heat;
    heat.height = 2;
    heat.width = 1;
    heat.pixels = {1, 2, 3, 4, 5, 6};
    RgbImage combo = side_by_side(gray, heat);
    REQUIRE(combo.height == 2);
    REQUIRE(combo.width == 2);
    REQUIRE(combo.pixels == std::vector<uint8_t>{10, 10, 10, 1, 2, 3, 20, 20, 20, 4, 5, 6});

    std::vector<uint8_t> wrong = {1, 2, 3};
    REQUIRE_THROWS_AS(side_by_side(wrong, heat), ParameterError);
}
