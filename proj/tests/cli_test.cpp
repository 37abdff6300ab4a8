#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "xrv/dataset.hpp"
#include "xrv/metrics.hpp"

namespace fs = std::filesystem;
using testutil::run_cli;

namespace {

std::size_t line_count(const std::string& path) {
    return xrv::read_manifest_lines(path).size();
}

}  // namespace

TEST(Cli, FullPipelineSplitAugmentTrainEvalPredict) {
    testutil::TempDir tmp;
    const std::string root = tmp.str();

    // class-per-directory tree: 8+12+7+9 = 36 images of 16x16
    const xrv::Dataset tree = testutil::make_random_dataset({8, 12, 7, 9}, 16, 16, 51);
    testutil::write_png_tree(tree, fs::path(root) / "data");

    // ---- split ----
    auto split = run_cli("split --data " + root + "/data --test-frac 0.25 --seed 5 --out " + root + "/work --size 16");
    ASSERT_EQ(split.exit_code, 0) << split.output;
    const std::string train_manifest = root + "/work/splits/5/train.txt";
    const std::string test_manifest = root + "/work/splits/5/test.txt";
    // per-class round-half-up: 2 + 3 + 2 + 2 = 9 test, 27 train
    EXPECT_EQ(line_count(train_manifest), 27u);
    EXPECT_EQ(line_count(test_manifest), 9u);
    EXPECT_NE(split.output.find("class0"), std::string::npos);

    // identical reruns
    auto split2 = run_cli("split --data " + root + "/data --test-frac 0.25 --seed 5 --out " + root + "/work2 --size 16");
    ASSERT_EQ(split2.exit_code, 0);
    EXPECT_EQ(testutil::read_file(train_manifest), testutil::read_file(root + "/work2/splits/5/train.txt"));

    // ---- augment (reduced: 4 variants per original) ----
    auto aug = run_cli("augment --manifest " + train_manifest + " --data " + root + "/data --mode reduced --seed 6 --out " +
                       root + "/work --size 16");
    ASSERT_EQ(aug.exit_code, 0) << aug.output;
    const std::string aug_manifest = root + "/work/augmented/manifest.txt";
    EXPECT_EQ(line_count(aug_manifest), 27u * 5u);
    EXPECT_NE(aug.output.find("135"), std::string::npos);

    // ---- train ----
    auto train = run_cli("train --manifest " + aug_manifest + " --model cnn --size 16 --channels 4,8 --hidden 16 "
                         "--epochs 3 --batch 16 --seed 7 --out " + root + "/run");
    ASSERT_EQ(train.exit_code, 0) << train.output;
    EXPECT_TRUE(fs::exists(root + "/run/checkpoint.xrvt"));
    EXPECT_TRUE(fs::exists(root + "/run/history.csv"));
    const std::string history = testutil::read_file(root + "/run/history.csv");
    EXPECT_NE(history.find("epoch,train_loss,train_acc,valid_acc"), std::string::npos);
    EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 4);  // header + 3 epochs

    // ---- eval with the checkpoint ----
    auto eval = run_cli("eval --manifest " + test_manifest + " --data " + root + "/data --checkpoint " + root +
                        "/run/checkpoint.xrvt --out " + root + "/eval");
    ASSERT_EQ(eval.exit_code, 0) << eval.output;
    EXPECT_TRUE(fs::exists(root + "/eval/report.json"));
    EXPECT_TRUE(fs::exists(root + "/eval/report.txt"));
    EXPECT_TRUE(fs::exists(root + "/eval/confusion.csv"));
    const auto rep = xrv::report_from_json(nlohmann::json::parse(testutil::read_file(root + "/eval/report.json")));
    EXPECT_EQ(rep.sample_count, 9u);

    // ---- predict: probabilities sum to 1 ----
    const std::string one_image = root + "/data/" + tree.images[0].source;
    auto predict = run_cli("predict --image " + one_image + " --checkpoint " + root + "/run/checkpoint.xrvt");
    ASSERT_EQ(predict.exit_code, 0) << predict.output;
    double prob_sum = 0.0;
    std::istringstream is(predict.output);
    std::string word;
    std::vector<double> probs;
    while (is >> word) {
        try {
            const double v = std::stod(word);
            if (v >= 0.0 && v <= 1.0) probs.push_back(v);
        } catch (...) {
        }
    }
    ASSERT_GE(probs.size(), 4u);
    for (std::size_t i = probs.size() - 4; i < probs.size(); ++i) prob_sum += probs[i];
    EXPECT_NEAR(prob_sum, 1.0, 1e-6);
}

TEST(Cli, UsageErrorsExitTwo) {
    auto r = run_cli("split --test-frac 0.25 --seed 1");  // missing --data
    EXPECT_EQ(r.exit_code, 2);

    auto unknown = run_cli("explode");
    EXPECT_EQ(unknown.exit_code, 2);
}

TEST(Cli, EmptyManifestAugmentsToEmptyOutput) {
    testutil::TempDir tmp;
    std::ofstream(tmp.str() + "/empty.txt").close();
    auto r = run_cli("augment --manifest " + tmp.str() + "/empty.txt --mode full --seed 1 --out " + tmp.str() +
                     "/out --size 8");
    EXPECT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(line_count(tmp.str() + "/out/augmented/manifest.txt"), 0u);
}

TEST(Cli, AugmentFailsWhenNoEntryLoads) {
    testutil::TempDir tmp;
    {
        std::ofstream m(tmp.str() + "/m.txt");
        m << "classA/missing.png\n";
    }
    // wrong data root: every entry fails to decode
    auto r = run_cli("augment --manifest " + tmp.str() + "/m.txt --data " + tmp.str() +
                     " --mode full --seed 1 --out " + tmp.str() + "/out --size 8");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("check --data"), std::string::npos) << r.output;
}

TEST(Cli, MalformedConfigCitesLineNumber) {
    testutil::TempDir tmp;
    const xrv::Dataset tree = testutil::make_random_dataset({3, 3}, 8, 8, 52);
    testutil::write_png_tree(tree, fs::path(tmp.str()) / "data");
    auto split = run_cli("split --data " + tmp.str() + "/data --test-frac 0.34 --seed 1 --out " + tmp.str() +
                         " --size 8");
    ASSERT_EQ(split.exit_code, 0) << split.output;

    {
        std::ofstream cfg(tmp.str() + "/bad.cfg");
        cfg << "epochs = 2\n";
        cfg << "this line has no equals sign\n";
    }
    auto r = run_cli("train --manifest " + tmp.str() + "/splits/1/train.txt --data " + tmp.str() +
                     "/data --config " + tmp.str() + "/bad.cfg --out " + tmp.str() + "/run");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.output.find(":2:"), std::string::npos) << r.output;

    {
        std::ofstream cfg(tmp.str() + "/unknown.cfg");
        cfg << "not_a_key = 5\n";
    }
    auto r2 = run_cli("train --manifest " + tmp.str() + "/splits/1/train.txt --data " + tmp.str() +
                      "/data --config " + tmp.str() + "/unknown.cfg --out " + tmp.str() + "/run");
    EXPECT_EQ(r2.exit_code, 2);
    EXPECT_NE(r2.output.find("unknown key"), std::string::npos) << r2.output;
}

TEST(Cli, ConfigFileDrivesTrainingAndFlagsOverride) {
    testutil::TempDir tmp;
    const xrv::Dataset tree = testutil::make_random_dataset({4, 4}, 8, 8, 53);
    testutil::write_png_tree(tree, fs::path(tmp.str()) / "data");
    xrv::write_manifest(tree, tmp.str() + "/all.txt");

    {
        std::ofstream cfg(tmp.str() + "/train.cfg");
        cfg << "# toy run\n";
        cfg << "model = cnn\n";
        cfg << "size = 8\n";
        cfg << "channels = 4\n";
        cfg << "hidden = 8\n";
        cfg << "epochs = 5\n";
        cfg << "batch = 4\n";
        cfg << "seed = 9\n";
    }
    // flag overrides the config's epochs = 5
    auto r = run_cli("train --manifest " + tmp.str() + "/all.txt --data " + tmp.str() + "/data --config " +
                     tmp.str() + "/train.cfg --epochs 2 --out " + tmp.str() + "/run");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const std::string history = testutil::read_file(tmp.str() + "/run/history.csv");
    EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 3);  // header + 2 epochs
}

TEST(Cli, TrainReachesFullAccuracyOnSeparableTree) {
    testutil::TempDir tmp;
    const xrv::Dataset tree = testutil::make_solid_dataset(10, 4, 16, 16, 99);  // 40 images
    testutil::write_png_tree(tree, fs::path(tmp.str()) / "data");
    xrv::write_manifest(tree, tmp.str() + "/all.txt");

    auto r = run_cli("train --manifest " + tmp.str() + "/all.txt --data " + tmp.str() +
                     "/data --model cnn --size 16 --channels 8,16 --hidden 32 --optimizer adam --lr 0.001 "
                     "--epochs 25 --batch 8 --seed 1 --dtype float64 --out " + tmp.str() + "/run");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto lines = xrv::read_manifest_lines(tmp.str() + "/run/history.csv");
    // last row: epoch,train_loss,train_acc,valid_acc
    const std::string& last = lines.back();
    const std::size_t c1 = last.find(','), c2 = last.find(',', c1 + 1), c3 = last.find(',', c2 + 1);
    const double final_acc = std::stod(last.substr(c2 + 1, c3 - c2 - 1));
    EXPECT_DOUBLE_EQ(final_acc, 1.0) << r.output;
}

TEST(Cli, AugmentIsByteDeterministic) {
    testutil::TempDir tmp;
    const xrv::Dataset tree = testutil::make_random_dataset({2, 2}, 8, 8, 56);
    testutil::write_png_tree(tree, fs::path(tmp.str()) / "data");
    xrv::write_manifest(tree, tmp.str() + "/all.txt");

    for (const char* out : {"a", "b"}) {
        auto r = run_cli("augment --manifest " + tmp.str() + "/all.txt --data " + tmp.str() +
                         "/data --mode full --seed 4 --out " + tmp.str() + "/" + out + " --size 8");
        ASSERT_EQ(r.exit_code, 0) << r.output;
    }
    const auto lines = xrv::read_manifest_lines(tmp.str() + "/a/augmented/manifest.txt");
    ASSERT_EQ(lines.size(), 4u * 9u);
    EXPECT_EQ(testutil::read_file(tmp.str() + "/a/augmented/manifest.txt"),
              testutil::read_file(tmp.str() + "/b/augmented/manifest.txt"));
    for (const std::string& rel : lines) {
        ASSERT_EQ(testutil::read_file(tmp.str() + "/a/augmented/" + rel),
                  testutil::read_file(tmp.str() + "/b/augmented/" + rel))
            << rel;
    }
}

TEST(Cli, BaselineEvalPrintsAccuracy) {
    testutil::TempDir tmp;
    const xrv::Dataset tree = testutil::make_random_dataset({6, 10}, 8, 8, 54);
    testutil::write_png_tree(tree, fs::path(tmp.str()) / "data");
    auto split = run_cli("split --data " + tmp.str() + "/data --test-frac 0.25 --seed 2 --out " + tmp.str() +
                         " --size 8");
    ASSERT_EQ(split.exit_code, 0);

    auto r = run_cli("eval --manifest " + tmp.str() + "/splits/2/test.txt --data " + tmp.str() +
                     "/data --model majority --train-manifest " + tmp.str() + "/splits/2/train.txt --train-data " +
                     tmp.str() + "/data --size 8 --out " + tmp.str() + "/eval");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    // majority class is class1 (10 of 16); test holds 2+3, so accuracy = 3/5
    const auto rep = xrv::report_from_json(nlohmann::json::parse(testutil::read_file(tmp.str() + "/eval/report.json")));
    EXPECT_NEAR(rep.accuracy, 0.6, 1e-12);

    auto knn = run_cli("eval --manifest " + tmp.str() + "/splits/2/test.txt --data " + tmp.str() +
                       "/data --model knn --train-manifest " + tmp.str() + "/splits/2/train.txt --train-data " +
                       tmp.str() + "/data --size 8 --k 3 --out " + tmp.str() + "/eval_knn");
    ASSERT_EQ(knn.exit_code, 0) << knn.output;
    EXPECT_TRUE(fs::exists(tmp.str() + "/eval_knn/report.json"));
}

TEST(Cli, CrossValidationReportsFoldsAndMean) {
    testutil::TempDir tmp;
    const xrv::Dataset tree = testutil::make_random_dataset({6, 6}, 8, 8, 55);
    testutil::write_png_tree(tree, fs::path(tmp.str()) / "data");
    xrv::write_manifest(tree, tmp.str() + "/all.txt");

    auto r = run_cli("cv --manifest " + tmp.str() + "/all.txt --data " + tmp.str() +
                     "/data --model cnn --size 8 --channels 4 --hidden 8 --epochs 2 --batch 4 --seed 3 --folds 2 "
                     "--out " + tmp.str() + "/cv");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("fold 0"), std::string::npos);
    EXPECT_NE(r.output.find("fold 1"), std::string::npos);
    EXPECT_NE(r.output.find("mean validation accuracy"), std::string::npos);
    EXPECT_TRUE(fs::exists(tmp.str() + "/cv/cv_summary.json"));
    EXPECT_TRUE(fs::exists(tmp.str() + "/cv/fold0_history.csv"));
    EXPECT_TRUE(fs::exists(tmp.str() + "/cv/fold1_history.csv"));
}

TEST(Cli, VerifyPassesCleanAndFailsWithInjectedFault) {
    auto clean = run_cli("verify");
    ASSERT_EQ(clean.exit_code, 0) << clean.output;
    EXPECT_NE(clean.output.find("grad.model_vit"), std::string::npos);
    EXPECT_EQ(clean.output.find("[FAIL]"), std::string::npos);

    auto faulty = run_cli("verify --inject-fault dense");
    EXPECT_EQ(faulty.exit_code, 1);
    // the failing line names the corrupted layer check
    const std::size_t fail_pos = faulty.output.find("[FAIL]");
    ASSERT_NE(fail_pos, std::string::npos);
    const std::size_t line_start = faulty.output.rfind('\n', fail_pos) + 1;
    EXPECT_EQ(faulty.output.substr(line_start, 10).find("grad.dense"), 0u) << faulty.output;
}
