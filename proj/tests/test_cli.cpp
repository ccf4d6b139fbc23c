#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

const std::string& cli_path() {
    static const std::string path = [] {
        if (const char* env = std::getenv("CHAINCAST_CLI_PATH_OVERRIDE"); env && *env)
            return std::string(env);
#ifdef CHAINCAST_CLI_PATH
        return std::string(CHAINCAST_CLI_PATH);
#else
        return std::string();
#endif
    }();
    return path;
}

fs::path workspace() {
    static const fs::path ws = [] {
        fs::path p = fs::temp_directory_path() /
                     ("chaincast_cli_" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return ws;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Run the CLI through the shell, capturing stdout. `env_prefix` may hold
// VAR=value assignments.
RunResult run(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path capture = workspace() / ("stdout_" + std::to_string(counter++) + ".txt");
    std::string cmd = env_prefix.empty() ? "" : env_prefix + " ";
    cmd += "'" + cli_path() + "' " + args + " > '" + capture.string() + "' 2>/dev/null";
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(capture);
    return result;
}

std::string q(const fs::path& path) { return "'" + path.string() + "'"; }

std::size_t line_count(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

}  // namespace

TEST_CASE("binary path is wired through the environment") {
    REQUIRE_FALSE(cli_path().empty());
    REQUIRE(fs::exists(cli_path()));
}

TEST_CASE("gen -> train -> eval -> finetune -> compare -> sweep pipeline") {
    const fs::path ws = workspace() / "pipeline";
    fs::create_directories(ws);
    const std::string out_dir = " --out-dir " + q(ws);

    auto gen = run("gen --block 3 --slots 400 --outlier 0.02 --seed 5 --out train.txt" + out_dir);
    REQUIRE(gen.code == 0);
    REQUIRE(fs::exists(ws / "train.txt"));
    REQUIRE(fs::exists(ws / "train.txt.summary.json"));
    REQUIRE(gen.out.find("\"command\": \"gen\"") != std::string::npos);
    REQUIRE(gen.out.find("\"activation_fraction\"") != std::string::npos);
    REQUIRE(line_count(ws / "train.txt") == 400);

    REQUIRE(run("gen --block 3 --slots 300 --outlier 0.02 --seed 6 --out test.txt" + out_dir)
                .code == 0);

    auto train = run("train --predictor markov --space full --order 3 --train " +
                     q(ws / "train.txt") + " --out model.txt" + out_dir);
    REQUIRE(train.code == 0);
    REQUIRE(slurp(ws / "model.txt").rfind("chaincast model 1", 0) == 0);
    REQUIRE(train.out.find("\"states\": 8") != std::string::npos);

    auto eval = run("eval --model " + q(ws / "model.txt") + " --test " + q(ws / "test.txt") +
                    " --t-max 6 --plot --out report.csv" + out_dir);
    REQUIRE(eval.code == 0);
    REQUIRE(slurp(ws / "report.csv").rfind("T,success_rate,n_positions", 0) == 0);
    REQUIRE(fs::exists(ws / "report.svg"));
    REQUIRE(eval.out.find("\"mean_success\"") != std::string::npos);

    auto ft = run("finetune --model " + q(ws / "model.txt") + " --train " + q(ws / "train.txt") +
                  " --t-train 3 --epochs 3 --loss-csv loss.csv --out ft.txt" + out_dir);
    REQUIRE(ft.code == 0);
    REQUIRE(slurp(ws / "ft.txt").rfind("chaincast model 1", 0) == 0);
    REQUIRE(slurp(ws / "loss.csv").rfind("epoch,loss", 0) == 0);

    auto mlp = run("train --predictor mlp --m 3 --t-train 4 --epochs 5 --hidden 8,8 --train " +
                   q(ws / "train.txt") + " --out mlp.txt" + out_dir);
    REQUIRE(mlp.code == 0);
    auto mlp_eval = run("eval --model " + q(ws / "mlp.txt") + " --test " + q(ws / "test.txt") +
                        " --t-max 4 --out mlp_report.csv" + out_dir);
    REQUIRE(mlp_eval.code == 0);

    auto cmp = run("compare --report " + q(ws / "report.csv") + " --report " +
                   q(ws / "mlp_report.csv") + " --name markov --name mlp --plot --out cmp.csv" +
                   out_dir);
    // reports cover different horizon ranges: the merge must refuse
    REQUIRE(cmp.code == 2);

    auto cmp_ok = run("compare --report " + q(ws / "report.csv") + " --report " +
                      q(ws / "report.csv") + " --name a --name b --plot --out cmp.csv" + out_dir);
    REQUIRE(cmp_ok.code == 0);
    REQUIRE(slurp(ws / "cmp.csv").rfind("T,a,b", 0) == 0);
    REQUIRE(fs::exists(ws / "cmp.svg"));

    auto sweep = run("sweep-l --train " + q(ws / "train.txt") + " --test " + q(ws / "test.txt") +
                     " --order 3 --t-max 4 --l 0,4 --out sweep.csv" + out_dir);
    REQUIRE(sweep.code == 0);
    REQUIRE(slurp(ws / "sweep.csv").rfind("L,n_states,mean_success", 0) == 0);
    REQUIRE(line_count(ws / "sweep.csv") == 3);
}

TEST_CASE("ingest thresholds an energy csv") {
    const fs::path ws = workspace() / "ingest";
    fs::create_directories(ws);
    std::ofstream(ws / "energy.csv") << "0.1,0.9\n0.6\n0.2\n";

    auto result = run("ingest --in " + q(ws / "energy.csv") +
                      " --threshold 0.5 --out trace.txt --out-dir " + q(ws));
    REQUIRE(result.code == 0);
    REQUIRE(slurp(ws / "trace.txt") == "0\n1\n1\n0\n");
}

TEST_CASE("usage and data failures map to distinct exit codes") {
    const fs::path ws = workspace() / "codes";
    fs::create_directories(ws);

    REQUIRE(run("").code == 2);                       // a subcommand is required
    REQUIRE(run("--help").code == 0);
    REQUIRE(run("gen --no-such-flag 1").code == 2);   // parser error
    REQUIRE(run("gen --block 3 --slots 50").code == 2);  // --out missing

    auto missing = run("train --predictor markov --space full --order 2 --train " +
                       q(ws / "nope.txt") + " --out m.txt --out-dir " + q(ws));
    REQUIRE(missing.code == 3);
    REQUIRE(missing.out.find("\"error\"") != std::string::npos);
    REQUIRE(missing.out.find("\"exit_code\":3") != std::string::npos);

    REQUIRE(run("gen --block 3 --slots 40 --out tiny.txt --out-dir " + q(ws)).code == 0);
    REQUIRE(run("train --predictor markov --space full --order 2 --train " + q(ws / "tiny.txt") +
                " --out m.txt --out-dir " + q(ws))
                .code == 0);
    // test trace far too short for the horizon: a data error, not usage
    REQUIRE(run("eval --model " + q(ws / "m.txt") + " --test " + q(ws / "tiny.txt") +
                " --t-max 500 --train-name other --out r.csv --out-dir " + q(ws))
                .code == 3);
    // bad enum value
    REQUIRE(run("train --predictor markov --space hexagonal --order 2 --train " +
                q(ws / "tiny.txt") + " --out m2.txt --out-dir " + q(ws))
                .code == 2);
}

TEST_CASE("flags override config keys which override defaults") {
    const fs::path ws = workspace() / "config";
    fs::create_directories(ws);
    std::ofstream(ws / "gen.json") << R"({"block_size": 4, "n_slots": 100, "out": "from_cfg.txt"})";

    auto result = run("gen --config " + q(ws / "gen.json") + " --slots 60 --out-dir " + q(ws));
    REQUIRE(result.code == 0);
    REQUIRE(result.out.find("\"n_slots\": 60") != std::string::npos);    // flag wins
    REQUIRE(result.out.find("\"block_size\": 4") != std::string::npos);  // config wins
    REQUIRE(fs::exists(ws / "from_cfg.txt"));                            // config supplies out
    REQUIRE(line_count(ws / "from_cfg.txt") == 60);

    std::ofstream(ws / "bad_key.json") << R"({"blok_size": 4})";
    auto bad_key = run("gen --config " + q(ws / "bad_key.json") + " --slots 10 --out t.txt");
    REQUIRE(bad_key.code == 2);
    REQUIRE(bad_key.out.find("unknown key") != std::string::npos);

    std::ofstream(ws / "broken.json") << "{not json";
    REQUIRE(run("gen --config " + q(ws / "broken.json") + " --out t.txt").code == 2);

    std::ofstream(ws / "bad_type.json") << R"({"n_slots": "many"})";
    REQUIRE(run("gen --config " + q(ws / "bad_type.json") + " --out t.txt").code == 2);
}

TEST_CASE("relative outputs land under CHAINCAST_OUT_DIR") {
    const fs::path ws = workspace() / "envdir";
    auto result = run("gen --block 3 --slots 30 --out t.txt",
                      "CHAINCAST_OUT_DIR=" + q(ws));
    REQUIRE(result.code == 0);
    REQUIRE(fs::exists(ws / "t.txt"));
    REQUIRE(fs::exists(ws / "t.txt.summary.json"));
}

TEST_CASE("evaluating on the training trace only scores the second half") {
    const fs::path ws = workspace() / "halves";
    fs::create_directories(ws);
    const std::string out_dir = " --out-dir " + q(ws);
    REQUIRE(run("gen --block 3 --slots 60 --out t.txt" + out_dir).code == 0);
    REQUIRE(run("train --predictor markov --space full --order 3 --train " + q(ws / "t.txt") +
                " --out m.txt" + out_dir)
                .code == 0);

    // same file: positions start at the midpoint, t = 30 .. 55
    auto same = run("eval --model " + q(ws / "m.txt") + " --test " + q(ws / "t.txt") +
                    " --t-max 4 --out r1.csv" + out_dir);
    REQUIRE(same.code == 0);
    REQUIRE(same.out.find("\"n_positions\": 26") != std::string::npos);

    // declared-disjoint: full range, t = 2 .. 55
    auto disjoint = run("eval --model " + q(ws / "m.txt") + " --test " + q(ws / "t.txt") +
                        " --t-max 4 --train-name other --out r2.csv" + out_dir);
    REQUIRE(disjoint.code == 0);
    REQUIRE(disjoint.out.find("\"n_positions\": 54") != std::string::npos);

    // mlp models record their training trace too, so the restriction matches
    REQUIRE(run("train --predictor mlp --m 3 --t-train 4 --epochs 2 --hidden 6 --train " +
                q(ws / "t.txt") + " --out nn.txt" + out_dir)
                .code == 0);
    auto nn_same = run("eval --model " + q(ws / "nn.txt") + " --test " + q(ws / "t.txt") +
                       " --t-max 4 --out r3.csv" + out_dir);
    REQUIRE(nn_same.code == 0);
    REQUIRE(nn_same.out.find("\"n_positions\": 26") != std::string::npos);
}

TEST_CASE("numerical divergence exits with its own code") {
    const fs::path ws = workspace() / "diverge";
    fs::create_directories(ws);
    const std::string out_dir = " --out-dir " + q(ws);
    REQUIRE(run("gen --block 3 --slots 200 --outlier 0.05 --seed 2 --out t.txt" + out_dir)
                .code == 0);

    // An absurd learning rate overflows the hidden-layer products. (The
    // Markov path survives any learning rate: projection and the
    // max-subtracted softmax keep its matrix finite.)
    auto diverged = run("train --predictor mlp --m 3 --t-train 4 --epochs 3 --hidden 8,8"
                        " --lr 1e307 --train " +
                        q(ws / "t.txt") + " --out mlp.txt" + out_dir);
    REQUIRE(diverged.code == 4);
    REQUIRE(diverged.out.find("\"exit_code\":4") != std::string::npos);
}
