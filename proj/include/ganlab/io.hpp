#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganlab/combination.hpp"
#include "ganlab/dynamics.hpp"
#include "ganlab/geometry.hpp"
#include "ganlab/tinygan.hpp"
#include "ganlab/variance_lab.hpp"

// Persistence: CSV/PGM artifacts, dataset directories, training checkpoints
// and the per-run artifact manifest.
namespace ganlab::io {

namespace fs = std::filesystem;

// Shortest round-trip-exact decimal representation (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_file(const fs::path& path) {
  const auto content = read_file(path);
  return fnv1a64(content.data(), content.size());
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string trajectory_csv(const dynamics::Trajectory& traj, int d) {
  std::ostringstream out;
  out << "t";
  for (int i = 1; i <= d; ++i) out << ",w_" << i;
  for (int i = 1; i <= d; ++i) out << ",theta_" << i;
  out << "\n";
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    out << format_double(traj.times[r]);
    for (double v : traj.states[r].w) out << "," << format_double(v);
    for (double v : traj.states[r].theta) out << "," << format_double(v);
    out << "\n";
  }
  return out.str();
}

inline std::string sweep_csv(const std::vector<variance_lab::VarianceEstimate>& estimates,
                             const variance_lab::ScalingFit& fit,
                             const std::vector<double>& oracle_values) {
  if (oracle_values.size() != estimates.size())
    throw std::invalid_argument("sweep_csv: oracle values must match estimates");
  std::ostringstream out;
  out << "# slope=" << format_double(fit.slope) << " intercept=" << format_double(fit.intercept)
      << " r2=" << format_double(fit.r_squared) << "\n";
  out << "m,n_paths,var_hat,stderr,oracle_value\n";
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto& e = estimates[i];
    out << e.m << "," << e.n_paths << "," << format_double(e.var_hat) << ","
        << format_double(e.std_error) << "," << format_double(oracle_values[i]) << "\n";
  }
  return out.str();
}

inline std::string train_log_csv(const tinygan::TrainLog& log) {
  std::ostringstream out;
  out << "step,d_loss,g_loss,grad_d,grad_g,score_real,score_fake,score_dcom,"
         "prop_correct,mean_dif,probe_flips\n";
  for (const auto& e : log.entries) {
    out << e.step << "," << format_double(e.d_loss) << "," << format_double(e.g_loss) << ","
        << format_double(e.grad_d) << "," << format_double(e.grad_g) << ","
        << format_double(e.score_real) << "," << format_double(e.score_fake) << ","
        << format_double(e.score_dcom) << "," << format_double(e.prop_correct) << ","
        << format_double(e.mean_dif) << "," << e.probe_flips << "\n";
  }
  return out.str();
}

// Minimal CSV-of-doubles reader; lines starting with '#' are skipped, the
// first remaining line is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("csv: no column named " + name);
  }
};

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      table.header = cells;
      have_header = true;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// PGM (binary P5, 8-bit)
// ---------------------------------------------------------------------------

inline void write_pgm(const fs::path& path, const geometry::BinaryImage& img) {
  std::string content = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                        "\n255\n";
  content.reserve(content.size() + img.pixels.size());
  for (double p : img.pixels) {
    const long v = std::lround(255.0 * std::clamp(p, 0.0, 1.0));
    content.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  write_file(path, content);
}

inline geometry::BinaryImage read_pgm(const fs::path& path) {
  const std::string content = read_file(path);
  std::size_t pos = 0;
  const auto next_token = [&]() -> std::string {
    while (pos < content.size() && std::isspace(static_cast<unsigned char>(content[pos]))) ++pos;
    if (pos < content.size() && content[pos] == '#') {
      while (pos < content.size() && content[pos] != '\n') ++pos;
      while (pos < content.size() && std::isspace(static_cast<unsigned char>(content[pos]))) ++pos;
    }
    std::size_t start = pos;
    while (pos < content.size() && !std::isspace(static_cast<unsigned char>(content[pos]))) ++pos;
    return content.substr(start, pos - start);
  };
  if (next_token() != "P5") throw std::runtime_error("read_pgm: not a binary PGM: " + path.string());
  const int width = std::stoi(next_token());
  const int height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (maxval != 255) throw std::runtime_error("read_pgm: expected 8-bit maxval");
  ++pos;  // the single whitespace after the header
  if (content.size() - pos < static_cast<std::size_t>(width) * height)
    throw std::runtime_error("read_pgm: truncated pixel data");
  geometry::BinaryImage img(width, height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<unsigned char>(content[pos + i]) / 255.0;
  return img;
}

// ---------------------------------------------------------------------------
// Dataset directories: PGM files plus an index.csv
// ---------------------------------------------------------------------------

inline std::string image_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05d.pgm", index);
  return buf;
}

// index.csv schema: filename,target_count,base_index,sibling_of
// (sibling_of is -1 for images without a sibling).
inline std::vector<fs::path> write_dataset(const fs::path& dir,
                                           const geometry::GeometryDataset& dataset) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  std::vector<int> sibling_of(dataset.images.size(), -1);
  std::vector<int> base_index(dataset.images.size(), -1);
  for (std::size_t p = 0; p < dataset.sibling_pairs.size(); ++p) {
    const auto [a, b] = dataset.sibling_pairs[p];
    sibling_of[a] = b;
    sibling_of[b] = a;
    base_index[a] = static_cast<int>(p);
    base_index[b] = static_cast<int>(p);
  }
  std::ostringstream index;
  index << "filename,target_count,base_index,sibling_of\n";
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const std::string name = image_filename(static_cast<int>(i));
    write_pgm(dir / name, dataset.images[i]);
    written.push_back(dir / name);
    const int base = base_index[i] >= 0 ? base_index[i] : static_cast<int>(i);
    index << name << "," << dataset.target_count << "," << base << "," << sibling_of[i] << "\n";
  }
  write_file(dir / "index.csv", index.str());
  written.push_back(dir / "index.csv");
  return written;
}

inline geometry::GeometryDataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "index.csv");
  if (!in) throw std::runtime_error("cannot open " + (dir / "index.csv").string());
  geometry::GeometryDataset ds;
  std::string line;
  std::getline(in, line);  // header
  bool first = true;
  std::vector<int> sibling_of;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string name, target, base, sibling;
    std::getline(ss, name, ',');
    std::getline(ss, target, ',');
    std::getline(ss, base, ',');
    std::getline(ss, sibling, ',');
    if (first) {
      ds.target_count = std::stoi(target);
      first = false;
    }
    ds.images.push_back(read_pgm(dir / name));
    sibling_of.push_back(std::stoi(sibling));
  }
  for (std::size_t i = 0; i < sibling_of.size(); ++i)
    if (sibling_of[i] > static_cast<int>(i))
      ds.sibling_pairs.emplace_back(static_cast<int>(i), sibling_of[i]);
  return ds;
}

// Combination dataset directory; index schema: filename,op,source_pair with
// the pair quoted as "i,j".
inline std::vector<fs::path> write_comb_dataset(const fs::path& dir,
                                                const combination::CombDataset& dataset) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  std::ostringstream index;
  index << "filename,op,source_pair\n";
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const std::string name = image_filename(static_cast<int>(i));
    write_pgm(dir / name, dataset.images[i]);
    written.push_back(dir / name);
    index << name << "," << combination::to_string(dataset.op) << ",\""
          << dataset.source_pairs[i].first << "," << dataset.source_pairs[i].second << "\"\n";
  }
  write_file(dir / "index.csv", index.str());
  written.push_back(dir / "index.csv");
  return written;
}

// ---------------------------------------------------------------------------
// Checkpoints: generator, discriminator, optimizer states and the latent
// prior, in a little-endian binary layout. See README for the field list.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'G', 'L', 'C', 'K'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  tinygan::DenseNet gen;
  tinygan::DenseNet disc;
  tinygan::Optimizer gen_opt;
  tinygan::Optimizer disc_opt;
  tinygan::LatentPrior prior;
  std::uint64_t step = 0;
};

namespace detail {

struct Writer {
  std::string buf;

  void u8(std::uint8_t v) { buf.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u64(bits);
  }
  void f64s(const std::vector<double>& vs) {
    for (double v : vs) f64(v);
  }
};

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  void f64s(std::vector<double>& out) {
    for (double& v : out) v = f64();
  }
};

inline void put_activation(Writer& w, const tinygan::Activation& a) {
  w.u8(static_cast<std::uint8_t>(a.kind));
  w.f64(a.alpha);
}

inline tinygan::Activation get_activation(Reader& r) {
  tinygan::Activation a;
  a.kind = static_cast<tinygan::Activation::Kind>(r.u8());
  a.alpha = r.f64();
  return a;
}

inline void put_net(Writer& w, const tinygan::DenseNet& net) {
  put_activation(w, net.hidden);
  put_activation(w, net.output);
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    w.u32(static_cast<std::uint32_t>(l.w.rows));
    w.u32(static_cast<std::uint32_t>(l.w.cols));
    w.f64s(l.w.data);
    w.f64s(l.b);
  }
}

inline tinygan::DenseNet get_net(Reader& r) {
  tinygan::DenseNet net;
  net.hidden = get_activation(r);
  net.output = get_activation(r);
  const std::uint32_t n_layers = r.u32();
  net.layers.resize(n_layers);
  for (auto& l : net.layers) {
    const int rows = static_cast<int>(r.u32());
    const int cols = static_cast<int>(r.u32());
    l.w = tinygan::Matrix(rows, cols);
    r.f64s(l.w.data);
    l.b.assign(rows, 0.0);
    r.f64s(l.b);
  }
  return net;
}

inline void put_optimizer(Writer& w, const tinygan::Optimizer& opt) {
  const auto& spec = opt.spec();
  w.u8(static_cast<std::uint8_t>(spec.kind));
  if (spec.kind == tinygan::OptimizerSpec::Kind::Sgd) {
    w.f64(spec.lr);
    return;
  }
  w.f64(spec.alpha);
  w.f64(spec.beta1);
  w.f64(spec.beta2);
  w.f64(spec.eps);
  w.u64(opt.steps_taken());
  w.u32(static_cast<std::uint32_t>(opt.moment1_w().size()));
  for (std::size_t l = 0; l < opt.moment1_w().size(); ++l) {
    w.u32(static_cast<std::uint32_t>(opt.moment1_w()[l].rows));
    w.u32(static_cast<std::uint32_t>(opt.moment1_w()[l].cols));
    w.f64s(opt.moment1_w()[l].data);
    w.f64s(opt.moment2_w()[l].data);
    w.f64s(opt.moment1_b()[l]);
    w.f64s(opt.moment2_b()[l]);
  }
}

inline tinygan::Optimizer get_optimizer(Reader& r, const tinygan::DenseNet& net) {
  tinygan::OptimizerSpec spec;
  spec.kind = static_cast<tinygan::OptimizerSpec::Kind>(r.u8());
  if (spec.kind == tinygan::OptimizerSpec::Kind::Sgd) {
    spec.lr = r.f64();
    return tinygan::Optimizer(spec, net);
  }
  spec.alpha = r.f64();
  spec.beta1 = r.f64();
  spec.beta2 = r.f64();
  spec.eps = r.f64();
  const std::uint64_t t = r.u64();
  tinygan::Optimizer opt(spec, net);
  opt.set_steps_taken(t);
  const std::uint32_t n_layers = r.u32();
  if (n_layers != opt.moment1_w().size())
    throw std::runtime_error("checkpoint: optimizer layer count mismatch");
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int rows = static_cast<int>(r.u32());
    const int cols = static_cast<int>(r.u32());
    if (rows != opt.moment1_w()[l].rows || cols != opt.moment1_w()[l].cols)
      throw std::runtime_error("checkpoint: optimizer moment shape mismatch");
    r.f64s(opt.moment1_w()[l].data);
    r.f64s(opt.moment2_w()[l].data);
    r.f64s(opt.moment1_b()[l]);
    r.f64s(opt.moment2_b()[l]);
  }
  return opt;
}

inline void put_prior(Writer& w, const tinygan::LatentPrior& prior) {
  w.u8(static_cast<std::uint8_t>(prior.kind));
  w.u32(static_cast<std::uint32_t>(prior.dim));
  w.u32(static_cast<std::uint32_t>(prior.codes.size()));
  for (const auto& code : prior.codes) w.f64s(code);
}

inline tinygan::LatentPrior get_prior(Reader& r) {
  tinygan::LatentPrior prior;
  prior.kind = static_cast<tinygan::LatentPrior::Kind>(r.u8());
  prior.dim = static_cast<int>(r.u32());
  const std::uint32_t support = r.u32();
  prior.codes.resize(support);
  for (auto& code : prior.codes) {
    code.assign(prior.dim, 0.0);
    r.f64s(code);
  }
  return prior;
}

}  // namespace detail

inline void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  detail::Writer w;
  w.buf.append(kCheckpointMagic, 4);
  w.u8(kCheckpointVersion);
  detail::put_net(w, ckpt.gen);
  detail::put_net(w, ckpt.disc);
  detail::put_optimizer(w, ckpt.gen_opt);
  detail::put_optimizer(w, ckpt.disc_opt);
  detail::put_prior(w, ckpt.prior);
  w.u64(ckpt.step);
  write_file(path, w.buf);
}

inline Checkpoint load_checkpoint(const fs::path& path) {
  const std::string content = read_file(path);
  detail::Reader r{content};
  r.need(5);
  if (std::memcmp(content.data(), kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic header");
  r.pos = 4;
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.gen = detail::get_net(r);
  ckpt.disc = detail::get_net(r);
  ckpt.gen_opt = detail::get_optimizer(r, ckpt.gen);
  ckpt.disc_opt = detail::get_optimizer(r, ckpt.disc);
  ckpt.prior = detail::get_prior(r);
  ckpt.step = r.u64();
  return ckpt;
}

}  // namespace ganlab::io
