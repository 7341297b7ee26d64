#include <doctest.h>

#include <nlohmann/json.hpp>

#include "cli_util.hpp"

using cliutil::run;
using cliutil::scratch;
using cliutil::slurp;
namespace fs = std::filesystem;

namespace {

std::size_t count_lines(const std::string &s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST_CASE("usage errors exit 2")
{
    const fs::path dir = scratch("cli_usage");
    const fs::path log = dir / "log.txt";
    CHECK(run("--out \"" + dir.string() + "\" flow1d --target foo", log) == 2);
    const std::string msg = slurp(log);
    CHECK(msg.find("gauss-3") != std::string::npos);
    CHECK(msg.find("student") != std::string::npos);
    CHECK(msg.find("gmm-sym") != std::string::npos);
    CHECK(run("--out \"" + dir.string() + "\" approx2d --target nope", log) == 2);
    CHECK(slurp(log).find("mog") != std::string::npos);
    CHECK(run("--out \"" + dir.string() + "\" approx2d --method svgd", log) == 2);
    CHECK(run("--out \"" + dir.string() + "\" flow1d --eps 0", log) == 2);
    CHECK(run("bogus", log) == 2);
    CHECK(run("--threads 0 flow1d", log) == 2);
    fs::remove_all(dir);
}

TEST_CASE("flow1d with T = 0 records a single snapshot")
{
    const fs::path dir = scratch("cli_flow0");
    CHECK(run("--seed 3 --out \"" + dir.string() + "\" flow1d -M 20 -T 0", dir / "log.txt") == 0);
    const std::string traj = slurp(dir / "trajectory.csv");
    CHECK(traj.rfind("t,particle_id,dim_0\n", 0) == 0);
    CHECK(count_lines(traj) == 21);
    CHECK(count_lines(slurp(dir / "ksd.csv")) == 2);
    CHECK(count_lines(slurp(dir / "kde.csv")) == 402);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary["initial_ksd"] == summary["final_ksd"]);
    fs::remove_all(dir);
}

TEST_CASE("gof reads a points file")
{
    const fs::path dir = scratch("cli_gof");
    {
        std::ofstream pts(dir / "pts.csv");
        pts << "particle_id,dim_0\n";
        for (int i = 0; i < 50; ++i)
        {
            pts << i << ',' << (-3.0 + 0.02 * (i - 25)) << '\n';
        }
    }
    CHECK(run("--out \"" + dir.string() + "\" gof --target gauss-3 -B 200 --points \"" + (dir / "pts.csv").string() +
                  "\"",
              dir / "log.txt") == 0);
    const auto res = nlohmann::json::parse(slurp(dir / "gof.json"));
    CHECK(res["B"] == 200);
    CHECK((res["decision"] == "accept_H0" || res["decision"] == "reject_H0"));
    CHECK(run("--out \"" + dir.string() + "\" gof --target mog --points \"" + (dir / "pts.csv").string() + "\"",
              dir / "log.txt") == 2);
    CHECK(run("--out \"" + dir.string() + "\" gof --target gauss-3 --points \"" + (dir / "none.csv").string() + "\"",
              dir / "log.txt") == 3);
    fs::remove_all(dir);
}

TEST_CASE("em-train and predict")
{
    const fs::path dir = scratch("cli_em");
    const std::string out1 = (dir / "a").string();
    const std::string out2 = (dir / "b").string();
    const std::string common = " em-train --synthetic linear --n 30 --d-obs 4 --epochs 1 -T 40";
    CHECK(run("--seed 5 --out \"" + out1 + "\"" + common, dir / "log.txt") == 0);
    CHECK(run("--seed 5 --out \"" + out2 + "\"" + common, dir / "log.txt") == 0);
    const std::string monitor = slurp(fs::path(out1) / "monitor.csv");
    CHECK(monitor.rfind("epoch,expected_loglik\n1,", 0) == 0);
    CHECK(count_lines(monitor) == 2);
    CHECK(slurp(fs::path(out1) / "model.json") == slurp(fs::path(out2) / "model.json"));
    CHECK(fs::exists(fs::path(out1) / "generator.json"));

    // Zero-weight model: constant predictions at b.
    {
        std::ofstream m(dir / "zero.json");
        m << R"({"decoder":"linear","sigma":0.5,"W":[[0,0],[0,0],[0,0],[0,0]],"b":[1,2,3,4]})";
    }
    const std::string data = (fs::path(out1) / "data.csv").string();
    const std::string pout = (dir / "p").string();
    CHECK(run("--out \"" + pout + "\" predict -T 20 --model \"" + (dir / "zero.json").string() + "\" --data \"" + data +
                  "\" --target-cols 3",
              dir / "log.txt") == 0);
    const auto metrics = nlohmann::json::parse(slurp(fs::path(pout) / "metrics.json"));
    CHECK(metrics["r2"].get<double>() <= 0.0);
    const std::string preds = slurp(fs::path(pout) / "predictions.csv");
    CHECK(preds.find(",4\n") != std::string::npos);

    CHECK(run("--out \"" + pout + "\" predict --model \"" + (dir / "zero.json").string() + "\" --data \"" + data +
                  "\" --target-cols 9",
              dir / "log.txt") == 2);
    {
        std::ofstream empty(dir / "empty.csv");
    }
    CHECK(run("--out \"" + pout + "\" predict --model \"" + (dir / "zero.json").string() + "\" --data \"" +
                  (dir / "empty.csv").string() + "\" --target-cols 0",
              dir / "log.txt") == 3);
    CHECK(run("--out \"" + pout + "\" em-train --data \"" + (dir / "empty.csv").string() + "\"", dir / "log.txt") == 3);
    CHECK(run("--out \"" + pout + "\" em-train", dir / "log.txt") == 2);
    fs::remove_all(dir);
}

TEST_CASE("divergence exits 4")
{
    const fs::path dir = scratch("cli_div");
    CHECK(run("--out \"" + dir.string() + "\" flow1d -M 5 -T 500 --eps 50 --drift score+ansatz", dir / "log.txt") == 4);
    CHECK(slurp(dir / "log.txt").find("step") != std::string::npos);
    fs::remove_all(dir);
}
