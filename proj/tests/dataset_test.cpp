#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "uqaudit/dataset.hpp"
#include "uqaudit/errors.hpp"

using namespace uqaudit;

namespace {

ColumnSchema basic_schema() {
    ColumnSchema schema;
    schema.target = "label";
    schema.numericals = {"age"};
    schema.sensitive = {{"sex", true}};
    return schema;
}

Dataset tiny_dataset(const testutil::TempDir& dir) {
    const std::string csv =
        "age,sex,label\n"
        "30,M,1\n"
        "40,F,0\n"
        "50,M,1\n";
    const auto path = dir.file("tiny.csv");
    testutil::write_file(path, csv);
    return load_csv(path, basic_schema());
}

}  // namespace

TEST_CASE("load_csv ingests a three row file") {
    testutil::TempDir dir("csv");
    Dataset ds = tiny_dataset(dir);
    CHECK(ds.n_rows == 3);
    CHECK(ds.targets == std::vector<double>{1.0, 0.0, 1.0});
    CHECK(ds.column("sex") == std::vector<std::string>{"M", "F", "M"});
    CHECK(ds.column("age")[2] == "50");
}

TEST_CASE("load_csv honors rfc 4180 quoting") {
    testutil::TempDir dir("csvq");
    const std::string csv =
        "age,city,label\n"
        "30,\"Spring, Field\",1\n"
        "40,\"He said \"\"hi\"\"\",0\n";
    const auto path = dir.file("quoted.csv");
    testutil::write_file(path, csv);
    ColumnSchema schema;
    schema.target = "label";
    schema.numericals = {"age"};
    schema.categoricals = {"city"};
    Dataset ds = load_csv(path, schema);
    CHECK(ds.column("city")[0] == "Spring, Field");
    CHECK(ds.column("city")[1] == "He said \"hi\"");
}

TEST_CASE("load_csv errors name the offending column or cell") {
    testutil::TempDir dir("csverr");
    const auto path = dir.file("bad.csv");
    testutil::write_file(path, "age,sex,label\n30,M,1\n");

    SUBCASE("missing declared column") {
        ColumnSchema schema = basic_schema();
        schema.sensitive.push_back({"race", true});
        CHECK_THROWS_WITH_AS(load_csv(path, schema), doctest::Contains("race"),
                             SchemaError);
    }
    SUBCASE("unparseable numeric cell") {
        testutil::write_file(path, "age,sex,label\nthirty,M,1\n");
        CHECK_THROWS_WITH_AS(load_csv(path, basic_schema()),
                             doctest::Contains("age"), ParseError);
    }
    SUBCASE("non binary classification target") {
        testutil::write_file(path, "age,sex,label\n30,M,2\n");
        CHECK_THROWS_AS(load_csv(path, basic_schema()), ValidationError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_csv(dir.file("nope.csv"), basic_schema()), IoError);
    }
}

TEST_CASE("schema invariants are enforced") {
    ColumnSchema schema = basic_schema();
    SUBCASE("target listed as a feature") {
        schema.numericals.push_back("label");
        CHECK_THROWS_AS(schema.validate(), SchemaError);
    }
    SUBCASE("numerical and categorical overlap") {
        schema.categoricals.push_back("age");
        CHECK_THROWS_AS(schema.validate(), SchemaError);
    }
    SUBCASE("valid schema passes") { CHECK_NOTHROW(schema.validate()); }
}

TEST_CASE("split produces the requested sizes with remainder to train") {
    testutil::TempDir dir("split");
    std::string csv = "age,sex,label\n";
    for (int i = 0; i < 100; ++i) {
        csv += std::to_string(20 + i % 50) + "," + (i % 2 ? "M" : "F") + "," +
               std::to_string(i % 2) + "\n";
    }
    const auto path = dir.file("hundred.csv");
    testutil::write_file(path, csv);
    Dataset ds = load_csv(path, basic_schema());

    SplitIndices sp = split(ds, 0.8, 0.1, 0.1, 7);
    CHECK(sp.train.size() == 80);
    CHECK(sp.test.size() == 10);
    CHECK(sp.calibration.size() == 10);

    // Disjoint and jointly exhaustive.
    std::set<std::size_t> all;
    for (auto i : sp.train) all.insert(i);
    for (auto i : sp.test) all.insert(i);
    for (auto i : sp.calibration) all.insert(i);
    CHECK(all.size() == 100);
    CHECK(*all.rbegin() == 99);

    SUBCASE("determinism and seed sensitivity") {
        SplitIndices again = split(ds, 0.8, 0.1, 0.1, 7);
        CHECK(again.train == sp.train);
        CHECK(again.test == sp.test);
        CHECK(again.calibration == sp.calibration);
        SplitIndices other = split(ds, 0.8, 0.1, 0.1, 8);
        CHECK(other.train != sp.train);
    }
    SUBCASE("identity split") {
        SplitIndices whole = split(ds, 1.0, 0.0, 0.0, 7);
        CHECK(whole.train.size() == 100);
        CHECK(whole.test.empty());
        CHECK(whole.calibration.empty());
    }
    SUBCASE("fractions above one rejected") {
        CHECK_THROWS_AS(split(ds, 0.8, 0.3, 0.1, 7), ValidationError);
    }
    SUBCASE("nonzero fraction must yield at least one row") {
        CHECK_THROWS_AS(split(ds, 0.999, 0.001, 0.0, 7), ValidationError);
    }
}

TEST_CASE("partition_subgroups hand case with an intersection") {
    testutil::TempDir dir("part");
    const std::string csv =
        "age,sex,race,label\n"
        "30,M,W,1\n"   // priv on both
        "31,M,B,0\n"   // mixed
        "32,F,W,1\n"   // mixed
        "33,F,B,0\n";  // dis on both
    const auto path = dir.file("four.csv");
    testutil::write_file(path, csv);
    ColumnSchema schema;
    schema.target = "label";
    schema.numericals = {"age"};
    schema.sensitive = {{"sex", true}, {"race", true}};
    Dataset ds = load_csv(path, schema);

    SubgroupSpec spec;
    spec.attributes = {{"sex", "M"}, {"race", "W"}};
    spec.intersections = {{"sex", "race"}};
    spec.validate(schema);

    std::vector<std::size_t> rows{0, 1, 2, 3};
    SubgroupPartition part = partition_subgroups(ds, rows, spec);

    CHECK(part.at("overall") == rows);
    CHECK(part.at("sex_priv") == std::vector<std::size_t>{0, 1});
    CHECK(part.at("sex_dis") == std::vector<std::size_t>{2, 3});
    CHECK(part.at("race_priv") == std::vector<std::size_t>{0, 2});
    CHECK(part.at("race_dis") == std::vector<std::size_t>{1, 3});
    // Mixed rows (M,B) and (F,W) belong to neither intersectional group.
    CHECK(part.at("sex&race_priv") == std::vector<std::size_t>{0});
    CHECK(part.at("sex&race_dis") == std::vector<std::size_t>{3});

    SUBCASE("single attribute priv and dis partition the split") {
        std::vector<std::size_t> merged = part.at("sex_priv");
        for (auto i : part.at("sex_dis")) merged.push_back(i);
        std::sort(merged.begin(), merged.end());
        CHECK(merged == rows);
    }
    SUBCASE("all privileged rows leave the dis group empty, not missing") {
        std::vector<std::size_t> priv_only{0, 1};
        SubgroupPartition p2 = partition_subgroups(ds, priv_only, spec);
        REQUIRE(p2.count("sex_dis") == 1);
        CHECK(p2.at("sex_dis").empty());
    }
    SUBCASE("intersection must reference declared attributes") {
        SubgroupSpec bad = spec;
        bad.intersections = {{"sex", "city"}};
        CHECK_THROWS_AS(bad.validate(schema), SchemaError);
    }
    SUBCASE("intersection needs at least two attributes") {
        SubgroupSpec bad = spec;
        bad.intersections = {{"sex"}};
        CHECK_THROWS_AS(bad.validate(schema), SchemaError);
    }
}

TEST_CASE("preprocessor scales with train statistics only") {
    testutil::TempDir dir("prep");
    const std::string csv =
        "age,city,label\n"
        "1,a,0\n"
        "2,b,1\n"
        "3,a,1\n"
        "9,c,0\n";  // row 3 held out of train
    const auto path = dir.file("scale.csv");
    testutil::write_file(path, csv);
    ColumnSchema schema;
    schema.target = "label";
    schema.numericals = {"age"};
    schema.categoricals = {"city"};
    Dataset ds = load_csv(path, schema);

    std::vector<std::size_t> train{0, 1, 2};
    Preprocessor pp = fit_preprocessor(ds, train);

    // Population convention: std of {1,2,3} = sqrt(2/3).
    CHECK(pp.numeric_stats.at("age").mean == doctest::Approx(2.0));
    CHECK(pp.numeric_stats.at("age").stddev ==
          doctest::Approx(0.816496580927726));
    // Vocabulary from train only, first-seen order.
    CHECK(pp.vocabularies.at("city") == std::vector<std::string>{"a", "b"});
    CHECK(pp.width == 3);  // age + 2 city levels

    Matrix m = transform(pp, ds, train);
    REQUIRE(m.rows() == 3);
    REQUIRE(m.cols() == 3);
    CHECK(m.at(0, 0) == doctest::Approx(-1.224744871391589));
    CHECK(m.at(1, 0) == doctest::Approx(0.0));
    // One-hot blocks row-sum to 1 for in-vocabulary rows.
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(m.at(r, 1) + m.at(r, 2) == doctest::Approx(1.0));
    }
    // Scaled train column has mean 0 and population std 1.
    double mean = 0.0;
    for (std::size_t r = 0; r < 3; ++r) mean += m.at(r, 0) / 3.0;
    CHECK(std::abs(mean) < 1e-9);
    double var = 0.0;
    for (std::size_t r = 0; r < 3; ++r) var += m.at(r, 0) * m.at(r, 0) / 3.0;
    CHECK(std::sqrt(var) == doctest::Approx(1.0));

    SUBCASE("unseen category encodes as a zero block") {
        std::vector<std::size_t> holdout{3};
        Matrix t = transform(pp, ds, holdout);
        CHECK(t.at(0, 1) == 0.0);
        CHECK(t.at(0, 2) == 0.0);
    }
    SUBCASE("value at the train mean scales to zero") {
        Matrix t = transform(pp, ds, std::vector<std::size_t>{1});
        CHECK(t.at(0, 0) == doctest::Approx(0.0));
    }
}

TEST_CASE("constant numerical column scales with divisor one and warns") {
    testutil::TempDir dir("const");
    const auto path = dir.file("const.csv");
    testutil::write_file(path, "age,label\n5,0\n5,1\n5,0\n");
    ColumnSchema schema;
    schema.target = "label";
    schema.numericals = {"age"};
    Dataset ds = load_csv(path, schema);

    std::vector<std::size_t> train{0, 1, 2};
    Preprocessor pp = fit_preprocessor(ds, train);
    CHECK(pp.numeric_stats.at("age").stddev == 1.0);
    REQUIRE(!pp.warnings.empty());
    CHECK(pp.warnings[0].find("age") != std::string::npos);
    Matrix m = transform(pp, ds, train);
    for (std::size_t r = 0; r < 3; ++r) CHECK(m.at(r, 0) == 0.0);
}

TEST_CASE("sensitive columns become features only when flagged") {
    testutil::TempDir dir("sens");
    const auto path = dir.file("sens.csv");
    testutil::write_file(path, "age,sex,label\n30,M,1\n40,F,0\n");
    ColumnSchema schema = basic_schema();
    Dataset ds = load_csv(path, schema);
    std::vector<std::size_t> train{0, 1};

    Preprocessor with = fit_preprocessor(ds, train);
    CHECK(with.width == 3);  // age + one-hot sex {M,F}

    schema.sensitive[0].as_feature = false;
    Dataset ds2 = load_csv(dir.file("sens.csv"), schema);
    Preprocessor without = fit_preprocessor(ds2, train);
    CHECK(without.width == 1);  // age only
}

TEST_CASE("gather_targets follows the index list") {
    testutil::TempDir dir("gt");
    Dataset ds = tiny_dataset(dir);
    CHECK(gather_targets(ds, {2, 0}) == std::vector<double>{1.0, 1.0});
    CHECK(gather_targets(ds, {1}) == std::vector<double>{0.0});
}
