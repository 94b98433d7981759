#include <gtest/gtest.h>

#include <cstdlib>

#include "astral/config.hpp"

using namespace astral;
using nlohmann::json;

namespace {

struct SeedEnv {
    explicit SeedEnv(const char* v) { ::setenv("ASTRAL_SEED", v, 1); }
    ~SeedEnv() { ::unsetenv("ASTRAL_SEED"); }
};

}  // namespace

TEST(RunConfig, EmptyObjectGivesDefaults) {
    const RunConfig c = run_config_from_json(json::object());
    EXPECT_EQ(c.train.epochs, 50u);
    EXPECT_EQ(c.train.learning_rate, 0.1);
    EXPECT_EQ(c.train.model.d_w, 50u);
    EXPECT_TRUE(c.train.use_at);
    EXPECT_EQ(c.conll.tag_col, -1);
    EXPECT_EQ(c.checkpoint_path(), "astral-out/model.ckpt");
}

TEST(RunConfig, UnknownKeyRejected) {
    try {
        run_config_from_json(json{{"learning_rat", 0.1}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("learning_rat"), std::string::npos);
    }
}

TEST(RunConfig, WrongTypeRejected) {
    EXPECT_THROW(run_config_from_json(json{{"epochs", "many"}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"use_gc", 3.5}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"d_h", -4}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json::array()), ConfigError);
}

TEST(RunConfig, InvalidValuesRejected) {
    EXPECT_THROW(run_config_from_json(json{{"window", 4}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"d_g", 0}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"adv_targets", json::array()}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"adv_targets", "Q"}}), ConfigError);
    EXPECT_NO_THROW(run_config_from_json(json{{"adv_targets", json::array()}, {"use_at", false}}));
}

TEST(RunConfig, DefaultsTextRoundTrips) {
    const json j = json::parse(defaults_text());
    EXPECT_EQ(j.size(), config_keys().size());
    const RunConfig c = run_config_from_json(j);
    EXPECT_EQ(to_json(c), to_json(RunConfig{}));
}

TEST(Overrides, ParseValuesAsJsonOrString) {
    json j = json::object();
    apply_overrides(j, {"epochs=7", "use_gc=false", "train_file=data/train.txt", "adv_targets=E_prime", "n_o=null"});
    const RunConfig c = run_config_from_json(j);
    EXPECT_EQ(c.train.epochs, 7u);
    EXPECT_FALSE(c.train.model.use_gc);
    EXPECT_EQ(c.train_file, "data/train.txt");
    EXPECT_EQ(c.train.adv.targets, (std::vector<std::string>{"E_prime"}));
    EXPECT_FALSE(c.train.model.n_o.has_value());
}

TEST(Overrides, CommaSeparatedTargets) {
    json j = json::object();
    apply_overrides(j, {"adv_targets=E_prime,H_prime"});
    EXPECT_EQ(run_config_from_json(j).train.adv.targets, (std::vector<std::string>{"E_prime", "H_prime"}));
}

TEST(Overrides, MalformedOverrideRejected) {
    json j = json::object();
    EXPECT_THROW(apply_overrides(j, {"epochs"}), ConfigError);
    EXPECT_THROW(apply_overrides(j, {"=3"}), ConfigError);
}

TEST(SeedEnvironment, ReplacesFileSeedAndLosesToOverride) {
    json j{{"seed", 5}};
    {
        SeedEnv env("99");
        apply_seed_env(j);
    }
    EXPECT_EQ(run_config_from_json(j).train.seed, 99u);
    apply_overrides(j, {"seed=3"});
    EXPECT_EQ(run_config_from_json(j).train.seed, 3u);
}

TEST(SeedEnvironment, GarbageRejected) {
    SeedEnv env("12abc");
    json j = json::object();
    EXPECT_THROW(apply_seed_env(j), ConfigError);
}

TEST(ConfigFile, MissingOrInvalidFile) {
    EXPECT_THROW(read_config_json("/nonexistent/astral.json"), ConfigError);
}

TEST(ConfigHelp, ListsEveryKey) {
    const std::string help = config_help_text();
    for (const auto& k : config_keys()) EXPECT_NE(help.find(k.name), std::string::npos) << k.name;
}
