#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "test_support.hpp"

using namespace tripstab;
using namespace tripstab::testing;

TEST(ConfigJson, FullDocumentRoundTrips) {
  LabConfig c;
  c.task.d = 3;
  c.task.n_plus = 12;
  c.sgd.T = 77;
  c.sgd.c = 0.01;
  c.rrm.lambda = 0.25;
  c.rrm.solver = RrmSolver::GradientDescent;
  c.sweep.algorithm = Algorithm::Rrm;
  c.sweep.sigma_rule = SigmaRule::OptimisticSchedule;
  c.sweep.n_grid = {10, 20, 40};
  c.stability.protocol = StabilityProtocol::OnAverage;
  c.stability.replacement = Replacement::Triple;
  c.seed = 5;
  const Json j = c;
  const LabConfig back = j.get<LabConfig>();
  EXPECT_EQ(Json(back), j);
  EXPECT_EQ(back.task.d, 3u);
  EXPECT_EQ(*back.sgd.c, 0.01);
  EXPECT_EQ(back.rrm.solver, RrmSolver::GradientDescent);
  EXPECT_EQ(back.sweep.n_grid, (std::vector<std::size_t>{10, 20, 40}));
  EXPECT_EQ(back.stability.replacement, Replacement::Triple);
}

TEST(ConfigJson, MissingSectionsKeepDefaults) {
  const LabConfig c = Json::parse(R"({"task": {"n_plus": 9}})").get<LabConfig>();
  EXPECT_EQ(c.task.n_plus, 9u);
  EXPECT_EQ(c.task.n_minus, TaskConfig{}.n_minus);
  EXPECT_EQ(c.rrm.lambda, RrmConfig{}.lambda);
  EXPECT_FALSE(c.seed.has_value());
}

TEST(ConfigJson, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(error_code_of([] { Json::parse(R"({"task": {"n_pluss": 9}})").get<LabConfig>(); }), Errc::InvalidConfig);
  EXPECT_EQ(error_code_of([] { Json::parse(R"({"sweep": {"algorithm": "adam"}})").get<LabConfig>(); }),
            Errc::InvalidConfig);
  EXPECT_EQ(error_code_of([] { Json::parse(R"({"rrm": {"lambda": "big"}})").get<LabConfig>(); }),
            Errc::InvalidConfig);
}

TEST(ConfigFile, LoadErrors) {
  EXPECT_EQ(error_code_of([] { load_lab_config("/nonexistent/config.json"); }), Errc::Io);
  const auto path = std::filesystem::temp_directory_path() / "tripstab_bad_config.json";
  {
    std::ofstream f(path);
    f << "{ not json";
  }
  EXPECT_EQ(error_code_of([&] { load_lab_config(path.string()); }), Errc::Parse);
  std::filesystem::remove(path);
}
