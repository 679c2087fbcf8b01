#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"

using namespace modalmr;
namespace fs = std::filesystem;

namespace {

class TempDir
{
public:
    TempDir()
    {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("modalmr-test-" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

struct RunResult
{
    int code;
    std::string out;
    std::string log;
};

RunResult run_cli(const std::vector<std::string>& args)
{
    std::ostringstream out, log;
    const int code = cli::run(args, out, log);
    return {code, out.str(), log.str()};
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::vector<double> numbers(const std::string& text)
{
    std::istringstream in(text);
    std::vector<double> v;
    for (double x; in >> x;) v.push_back(x);
    return v;
}

class ScopedEnv
{
public:
    ScopedEnv(const char* key, const char* value) : key_(key) { setenv(key, value, 1); }
    ~ScopedEnv() { unsetenv(key_); }

private:
    const char* key_;
};

} // namespace

TEST(ModelIo, RoundTripIsBitExact)
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    Points x(7, 2);
    Eigen::VectorXd y(7);
    for (int i = 0; i < 7; ++i) {
        x(i, 0) = std::abs(n(rng)) / 4;
        x(i, 1) = 1.0 / (3.0 + i);
        y(i) = n(rng);
    }
    RmrConfig cfg;
    cfg.sigma = 1.0 / 3.0;
    cfg.lambda = 0.0123456789;
    cfg.q = Penalty::L1;
    const auto model = fit(HypothesisKernel::laplacian(0.7), x, y, cfg);
    std::stringstream ss;
    io::write_model(ss, model);
    const auto back = io::read_model(ss);
    EXPECT_EQ(back.alpha, model.alpha);
    EXPECT_EQ(back.train_inputs, model.train_inputs);
    EXPECT_EQ(back.kernel, model.kernel);
    EXPECT_EQ(back.config.sigma, cfg.sigma);
    EXPECT_EQ(back.config.lambda, cfg.lambda);
    EXPECT_EQ(back.config.q, cfg.q);
    EXPECT_EQ(back.config.phi, cfg.phi);
    std::stringstream again;
    io::write_model(again, back);
    std::stringstream first;
    io::write_model(first, model);
    EXPECT_EQ(first.str(), again.str());
}

TEST(ModelIo, RejectsMalformedFiles)
{
    std::istringstream bad_header("modalmr-model 9\n");
    EXPECT_THROW(io::read_model(bad_header), ParseError);
    std::istringstream truncated("modalmr-model 1\nm 2\nd 1\nkernel gaussian_rbf bandwidth=0.2\nphi gaussian\n"
                                 "sigma 1\nlambda 0.1\nq 2\nalpha\n0.5\n");
    EXPECT_THROW(io::read_model(truncated), ParseError);
}

TEST(ChainIo, RoundTrip)
{
    const auto k = builtin_chain(ChainFamily::metropolis_grid(4, {1, 2, 3, 4}), 2);
    std::stringstream ss;
    io::write_chain(ss, k);
    const auto back = io::read_chain(ss);
    EXPECT_EQ(back.matrix(), k.matrix());
    EXPECT_EQ(back.embedding(), k.embedding());
}

TEST(Cli, ChainInfoExample)
{
    const auto r = run_cli({"chain-info", "--family", "two-state", "--p", "0.3", "--q", "0.2"});
    ASSERT_EQ(r.code, 0) << r.log;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j["gamma_abs"].get<double>(), 0.5, 1e-12);
    EXPECT_NEAR(j["pi"][0].get<double>(), 0.4, 1e-12);
    EXPECT_NEAR(j["pi"][1].get<double>(), 0.6, 1e-12);
    EXPECT_NE(r.log.find("gamma_abs=0.5"), std::string::npos);
    EXPECT_NE(r.log.find("pi=(0.4, 0.6)"), std::string::npos);
}

TEST(Cli, CheckKernel)
{
    const auto ok = run_cli({"check-kernel", "--phi", "epanechnikov"});
    EXPECT_EQ(ok.code, 0);
    EXPECT_NEAR(nlohmann::json::parse(ok.out)["second_moment"].get<double>(), 0.2, 1e-9);
    EXPECT_EQ(run_cli({"check-kernel", "--phi", "correntropy"}).code, 2);
    const auto bad = run_cli({"check-kernel", "--phi", "cauchy"});
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.log.find("cauchy"), std::string::npos);
}

TEST(Cli, FitThenPredictReproducesFittedValues)
{
    TempDir tmp;
    ASSERT_EQ(run_cli({"generate", "--family", "sticky", "--n", "8", "--gamma", "0.4", "--m", "60", "--seed", "4",
                       "--out", tmp.file("data.txt")})
                  .code,
              0);
    for (const std::string phi : {"gaussian", "epanechnikov"}) {
        const auto fit_r = run_cli({"fit", "--data", tmp.file("data.txt"), "--phi", phi, "--sigma", "0.5", "--lambda",
                                    "0.01", "--out", tmp.file("model.txt"), "--fitted", tmp.file("fitted.txt")});
        ASSERT_EQ(fit_r.code, 0) << fit_r.log;
        const auto pred = run_cli({"predict", "--model", tmp.file("model.txt"), "--data", tmp.file("data.txt")});
        ASSERT_EQ(pred.code, 0) << pred.log;
        const auto fitted = numbers(slurp(tmp.file("fitted.txt")));
        const auto predicted = numbers(pred.out);
        ASSERT_EQ(fitted.size(), predicted.size());
        ASSERT_EQ(predicted.size(), 60u);
        for (std::size_t i = 0; i < fitted.size(); ++i) EXPECT_NEAR(fitted[i], predicted[i], 1e-12);
    }
}

TEST(Cli, ConfigFileKeysAndPrecedence)
{
    TempDir tmp;
    spit(tmp.file("good.cfg"), "# chain\nfamily = two-state\np = 0.3\nq = 0.4\n");
    const auto from_file = run_cli({"chain-info", "--config", tmp.file("good.cfg")});
    ASSERT_EQ(from_file.code, 0) << from_file.log;
    EXPECT_NEAR(nlohmann::json::parse(from_file.out)["gamma_abs"].get<double>(), 0.7, 1e-12);

    const auto overridden = run_cli({"chain-info", "--config", tmp.file("good.cfg"), "--q", "0.2"});
    ASSERT_EQ(overridden.code, 0);
    EXPECT_NEAR(nlohmann::json::parse(overridden.out)["gamma_abs"].get<double>(), 0.5, 1e-12);

    spit(tmp.file("bad.cfg"), "family = iid\nbogus_key = 3\n");
    const auto bad = run_cli({"chain-info", "--config", tmp.file("bad.cfg")});
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.log.find("bogus_key"), std::string::npos);
    EXPECT_NE(bad.log.find("family"), std::string::npos);
    EXPECT_NE(bad.log.find("laziness"), std::string::npos);
}

TEST(Cli, UnknownFlagsAndHelp)
{
    EXPECT_EQ(run_cli({"chain-info", "--frobnicate", "1"}).code, 1);
    EXPECT_EQ(run_cli({"no-such-command"}).code, 1);
    const auto help = run_cli({"learning-curve", "--help"});
    EXPECT_EQ(help.code, 0);
    const std::string all = help.out + help.log;
    for (const char* flag : {"--m-grid", "--replicates", "--schedule", "--seed", "--out", "--config", "--jobs"})
        EXPECT_NE(all.find(flag), std::string::npos) << flag;
}

TEST(Cli, ValidationAndNumericExitCodes)
{
    const auto invalid = run_cli({"chain-info", "--family", "two-state", "--p", "1.5"});
    EXPECT_EQ(invalid.code, 1);
    EXPECT_NE(invalid.log.find("p"), std::string::npos);
    // The identity chain has no unique stationary law.
    TempDir tmp;
    spit(tmp.file("identity.txt"), "2 1\n1 0\n0 1\n0\n1\n");
    const auto numeric = run_cli({"chain-info", "--chain-file", tmp.file("identity.txt")});
    EXPECT_EQ(numeric.code, 2) << numeric.log;
}

TEST(Cli, LogLevels)
{
    {
        ScopedEnv env("MODALMR_LOG", "quiet");
        const auto r = run_cli({"chain-info", "--family", "iid", "--n", "3"});
        EXPECT_EQ(r.code, 0);
        EXPECT_TRUE(r.log.empty()) << r.log;
    }
    {
        ScopedEnv env("MODALMR_LOG", "loud");
        EXPECT_EQ(run_cli({"chain-info", "--family", "iid", "--n", "3"}).code, 1);
    }
    const auto r = run_cli({"chain-info", "--family", "iid", "--n", "3"});
    EXPECT_NE(r.log.find("chain-info:"), std::string::npos);
}

TEST(Cli, ExperimentWritesCsvAndManifest)
{
    TempDir tmp;
    const auto r = run_cli({"learning-curve", "--family", "iid", "--n", "8", "--m-grid", "16,32,64", "--replicates",
                            "2", "--seed", "5", "--out", tmp.file("lc.csv")});
    ASSERT_EQ(r.code, 0) << r.log;
    const auto csv = slurp(tmp.file("lc.csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "m,gamma_abs,replicate,excess_risk,lambda_used,sigma_used,ok");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    const auto manifest = nlohmann::json::parse(slurp(tmp.file("lc.csv.manifest.json")));
    EXPECT_EQ(manifest["command"], "learning-curve");
    EXPECT_EQ(manifest["seed"], 5);
    EXPECT_EQ(manifest["version"], modalmr::version);
}

TEST(Cli, BinaryExitCodes)
{
    const std::string bin = MODALMR_CLI_PATH;
    auto status = [&](const std::string& args) {
        const int raw = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    EXPECT_EQ(status("chain-info --family two-state --p 0.3 --q 0.2"), 0);
    EXPECT_EQ(status("chain-info --family two-state --p 3"), 1);
    EXPECT_EQ(status("check-kernel --phi correntropy"), 2);
    EXPECT_EQ(status("--help"), 0);
}
