#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ganlab/cli.hpp"
#include "ganlab/io.hpp"
#include "ganlab/svg.hpp"

using namespace ganlab;
namespace fs = std::filesystem;
using Catch::Approx;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("ganlab_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Strict-enough XML well-formedness check: tag balance, quoted attributes,
// a single root element.
bool well_formed_xml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  int roots = 0;
  const auto fail = [](const char*) { return false; };
  while (i < text.size()) {
    if (text[i] != '<') {
      if (text[i] == '>') return fail("stray >");
      ++i;
      continue;
    }
    if (text.compare(i, 5, "<?xml") == 0) {
      const auto end = text.find("?>", i);
      if (end == std::string::npos) return fail("unterminated declaration");
      i = end + 2;
      continue;
    }
    if (text.compare(i, 4, "<!--") == 0) {
      const auto end = text.find("-->", i);
      if (end == std::string::npos) return fail("unterminated comment");
      i = end + 3;
      continue;
    }
    const auto end = text.find('>', i);
    if (end == std::string::npos) return fail("unterminated tag");
    std::string tag = text.substr(i + 1, end - i - 1);
    i = end + 1;
    const bool closing = !tag.empty() && tag[0] == '/';
    const bool self_closing = !tag.empty() && tag.back() == '/';
    if (closing) tag = tag.substr(1);
    if (self_closing) tag.pop_back();
    // attribute quoting: an even number of quotes and no bare '=' at the end
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return fail("unbalanced quotes");
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
    if (name.empty()) return fail("empty tag name");
    if (closing) {
      if (stack.empty() || stack.back() != name) return fail("mismatched close");
      stack.pop_back();
    } else if (!self_closing) {
      if (stack.empty() && roots++ > 0) return fail("multiple roots");
      stack.push_back(name);
    } else if (stack.empty()) {
      ++roots;
      if (roots > 1) return fail("multiple roots");
    }
  }
  return stack.empty() && roots == 1;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

}  // namespace

TEST_CASE("PGM round trip preserves binary images") {
  const auto ds = geometry::generate_paired(3, 50);
  const auto dir = temp_dir("pgm");
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto path = dir / ("img" + std::to_string(i) + ".pgm");
    io::write_pgm(path, ds.images[i]);
    const auto back = io::read_pgm(path);
    REQUIRE(back.width == ds.images[i].width);
    REQUIRE(back.pixels == ds.images[i].pixels);
  }
}

TEST_CASE("dataset round trip keeps images, target and sibling structure") {
  const auto ds = geometry::generate_paired(5, 51);
  const auto dir = temp_dir("dataset");
  io::write_dataset(dir, ds);
  const auto back = io::load_dataset(dir);
  REQUIRE(back.images.size() == ds.images.size());
  CHECK(back.target_count == 2);
  CHECK(back.sibling_pairs == ds.sibling_pairs);
  for (std::size_t i = 0; i < ds.images.size(); ++i)
    REQUIRE(back.images[i].pixels == ds.images[i].pixels);
}

TEST_CASE("comb dataset directory carries op and source pairs") {
  const auto ds = geometry::generate_paired(3, 52);
  const auto dcom = combination::build_dcom(ds.images, combination::CombOp::Or, 10, 1);
  const auto dir = temp_dir("comb");
  io::write_comb_dataset(dir, dcom);
  const auto index = slurp(dir / "index.csv");
  CHECK(index.find("filename,op,source_pair") == 0);
  CHECK(index.find("or,\"0,1\"") != std::string::npos);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto ds = geometry::generate_paired(4, 53);
  tinygan::GanConfig config;
  config.regime = tinygan::Regime::PCR;
  config.pcr_op = combination::CombOp::Or;
  config.batchsize = 4;
  config.steps = 3;
  config.seed = 99;
  config.latent_dim = 6;
  config.gen_hidden = {12};
  config.disc_hidden = {12};
  config.eval_fakes = 4;
  config.eval_reals = 4;
  config.eval_dif = 2;
  const auto result = tinygan::train(config, ds);
  const io::Checkpoint saved{result.gen, result.disc, result.gen_opt, result.disc_opt,
                             result.prior, 3};
  const auto path = temp_dir("ckpt") / "checkpoint.bin";
  io::save_checkpoint(path, saved);
  const auto back = io::load_checkpoint(path);
  CHECK(back.step == 3);
  REQUIRE(back.gen.layers.size() == saved.gen.layers.size());
  for (std::size_t l = 0; l < saved.gen.layers.size(); ++l) {
    REQUIRE(back.gen.layers[l].w.data == saved.gen.layers[l].w.data);
    REQUIRE(back.gen.layers[l].b == saved.gen.layers[l].b);
  }
  for (std::size_t l = 0; l < saved.disc.layers.size(); ++l)
    REQUIRE(back.disc.layers[l].w.data == saved.disc.layers[l].w.data);
  CHECK(back.gen.output.kind == tinygan::Activation::Kind::Sigmoid);
  CHECK(back.prior.codes == saved.prior.codes);
  CHECK(back.disc_opt.steps_taken() == saved.disc_opt.steps_taken());
  REQUIRE(back.disc_opt.moment1_w().size() == saved.disc_opt.moment1_w().size());
  for (std::size_t l = 0; l < saved.disc_opt.moment1_w().size(); ++l)
    REQUIRE(back.disc_opt.moment1_w()[l].data == saved.disc_opt.moment1_w()[l].data);

  SECTION("corrupted magic is rejected") {
    auto content = slurp(path);
    content[0] = 'X';
    const auto bad = path.parent_path() / "bad.bin";
    io::write_file(bad, content);
    CHECK_THROWS_AS(io::load_checkpoint(bad), std::runtime_error);
  }
}

TEST_CASE("format_double survives a round trip") {
  for (double v : {0.1, 3.141592653589793, -2.2250738585072014e-308, 123456789.123456789}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
}

TEST_CASE("SVG output is well-formed") {
  svg::Series s1{"alpha", {0, 1, 2, 3}, {0.5, 0.25, 0.1, 0.9}, false};
  svg::Series s2{"beta < gamma & co", {0, 1, 2, 3}, {1.5, 1.25, 1.1, 1.9}, true};
  const auto chart = svg::render_chart({s1, s2}, "title & <stuff>", "x", "y");
  CHECK(well_formed_xml(chart));
  CHECK(chart.find("<svg") != std::string::npos);
  CHECK(chart.find("polyline") != std::string::npos);
  CHECK(well_formed_xml("<a><b></b></a>"));
  CHECK_FALSE(well_formed_xml("<a><b></a></b>"));
  CHECK_FALSE(well_formed_xml("<a>"));
}

TEST_CASE("cli: simulate writes a trajectory matching the closed orbit") {
  const auto dir = temp_dir("cli_sim");
  const int rc = cli::run_command({"simulate", "--m", "inf", "--d", "1", "--w0", "1", "--theta0",
                                   "0", "--t-end", "6.2831853", "--dt", "1e-4", "--seed", "1",
                                   "--out", dir.string()});
  REQUIRE(rc == 0);
  const auto table = io::read_csv(dir / "trajectory.csv");
  REQUIRE(table.header == std::vector<std::string>{"t", "w_1", "theta_1"});
  const auto& last = table.rows.back();
  CHECK(std::abs(last[1] - 1.0) < 1e-3);
  CHECK(std::abs(last[2] - 0.0) < 1e-3);
  CHECK(fs::exists(dir / "resolved-config.txt"));
  CHECK(fs::exists(dir / "manifest.csv"));
}

TEST_CASE("cli: gen-geometry emits the dataset and the manifest") {
  const auto dir = temp_dir("cli_geo");
  const int rc =
      cli::run_command({"gen-geometry", "--n-base", "32", "--seed", "3", "--out", dir.string()});
  REQUIRE(rc == 0);
  int pgms = 0;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".pgm") ++pgms;
  CHECK(pgms == 64);
  const auto manifest = slurp(dir / "manifest.csv");
  CHECK(manifest.find("index.csv") != std::string::npos);
  CHECK(manifest.find("img_00000.pgm") != std::string::npos);
}

TEST_CASE("cli: variance-sweep CSV has the fit header and oracle column") {
  const auto dir = temp_dir("cli_sweep");
  const int rc = cli::run_command({"variance-sweep", "--schedule", "constant", "--m", "1,2,4",
                                   "--paths", "60", "--t", "3.14159265", "--dt", "2e-3", "--seed",
                                   "7", "--out", dir.string()});
  REQUIRE(rc == 0);
  const auto content = slurp(dir / "sweep.csv");
  CHECK(content.rfind("# slope=", 0) == 0);
  const auto table = io::read_csv(dir / "sweep.csv");
  REQUIRE(table.header ==
          std::vector<std::string>{"m", "n_paths", "var_hat", "stderr", "oracle_value"});
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0][4] == Approx(3.14159265).epsilon(1e-6));
}

TEST_CASE("cli: plot renders a CSV into well-formed SVG") {
  const auto dir = temp_dir("cli_plot");
  io::write_file(dir / "data.csv", "x,a,b\n0,1,2\n1,2,1\n2,4,0.5\n");
  const int rc = cli::run_command({"plot", "--in", (dir / "data.csv").string(), "--x", "x", "--y",
                                   "a,b", "--seed", "1", "--out", dir.string()});
  REQUIRE(rc == 0);
  CHECK(well_formed_xml(slurp(dir / "chart.svg")));
}

TEST_CASE("cli: config file handling") {
  const auto dir = temp_dir("cli_cfg");
  SECTION("file values with flag overrides") {
    io::write_file(dir / "sim.cfg",
                   "# a comment\nseed=1\nt-end=6.2831853\ndt=1e-3\nm=inf\nw0=1\ntheta0=0\n");
    const int rc = cli::run_command({"simulate", "--config", (dir / "sim.cfg").string(), "--seed",
                                     "2", "--out", (dir / "run").string()});
    REQUIRE(rc == 0);
    const auto resolved = slurp(dir / "run" / "resolved-config.txt");
    CHECK(resolved.find("seed=2") != std::string::npos);  // flag wins
    std::istringstream lines(resolved);
    std::string line;
    bool dt_ok = false;
    while (std::getline(lines, line))
      if (line.rfind("dt=", 0) == 0) dt_ok = std::stod(line.substr(3)) == 0.001;
    CHECK(dt_ok);
  }
  SECTION("resolved config can be fed back") {
    io::write_file(dir / "sim2.cfg", "seed=5\nt-end=1.0\ndt=1e-2\n");
    REQUIRE(cli::run_command({"simulate", "--config", (dir / "sim2.cfg").string(), "--out",
                              (dir / "run2").string()}) == 0);
    REQUIRE(cli::run_command({"simulate", "--config",
                              (dir / "run2" / "resolved-config.txt").string(), "--out",
                              (dir / "run3").string()}) == 0);
    CHECK(slurp(dir / "run2" / "trajectory.csv") == slurp(dir / "run3" / "trajectory.csv"));
  }
  SECTION("unknown key names the key") {
    io::write_file(dir / "bad.cfg", "seed=1\nt-end=1.0\ndt=1e-2\nbananas=3\n");
    CHECK(cli::run_command({"simulate", "--config", (dir / "bad.cfg").string(), "--out",
                            (dir / "runx").string()}) != 0);
  }
  SECTION("type mismatch names the option") {
    io::write_file(dir / "bad2.cfg", "seed=1\nt-end=1.0\ndt=banana\n");
    CHECK(cli::run_command({"simulate", "--config", (dir / "bad2.cfg").string(), "--out",
                            (dir / "runy").string()}) != 0);
  }
  SECTION("missing seed is an error") {
    CHECK(cli::run_command({"simulate", "--dt", "1e-3", "--t-end", "1", "--out",
                            (dir / "runz").string()}) != 0);
  }
}

TEST_CASE("cli: unknown command is rejected with usage") {
  CHECK(cli::run_command({"frobnicate"}) != 0);
  CHECK(cli::run_command({}) != 0);
}

TEST_CASE("cli: reruns reproduce byte-identical data artifacts") {
  const auto dir = temp_dir("cli_rerun");
  const std::vector<std::string> base = {"variance-sweep", "--schedule", "vanishing", "--m",
                                         "2,4,8", "--paths", "40", "--t", "5.0", "--dt", "5e-3",
                                         "--seed", "11"};
  auto first = base, second = base;
  first.insert(first.end(), {"--out", (dir / "a").string()});
  second.insert(second.end(), {"--out", (dir / "b").string()});
  REQUIRE(cli::run_command(first) == 0);
  REQUIRE(cli::run_command(second) == 0);
  CHECK(slurp(dir / "a" / "sweep.csv") == slurp(dir / "b" / "sweep.csv"));
  CHECK(slurp(dir / "a" / "resolved-config.txt").find("out=") != std::string::npos);
}
