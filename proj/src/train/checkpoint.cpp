#include "ic3net/train/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ic3net/errors.hpp"

namespace ic3net::train {

namespace {

using diffnet::Matrix;

void write_matrix(std::ostream& os, const std::string& tag, const std::string& name, const Matrix<double>& m) {
  os << tag << ' ' << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      auto res = std::to_chars(buf, buf + sizeof(buf), m(r, c), std::chars_format::hex);
      if (c) os << ' ';
      os.write(buf, res.ptr - buf);
    }
    os << '\n';
  }
}

std::string expect_word(std::istream& is, const char* what) {
  std::string w;
  if (!(is >> w)) throw FormatError(std::string("checkpoint: unexpected end of file, expected ") + what);
  return w;
}

void expect_tag(std::istream& is, const std::string& tag) {
  const auto w = expect_word(is, tag.c_str());
  if (w != tag) throw FormatError("checkpoint: expected '" + tag + "', found '" + w + "'");
}

long read_long(std::istream& is, const char* what) {
  const auto w = expect_word(is, what);
  long v = 0;
  auto res = std::from_chars(w.data(), w.data() + w.size(), v);
  if (res.ec != std::errc() || res.ptr != w.data() + w.size()) {
    throw FormatError(std::string("checkpoint: bad ") + what + " '" + w + "'");
  }
  return v;
}

double read_hex(std::istream& is, const std::string& name) {
  const auto w = expect_word(is, "value");
  double v = 0.0;
  const char* first = w.data();
  const char* last = w.data() + w.size();
  bool neg = false;
  if (first != last && *first == '-') {
    neg = true;
    ++first;
  }
  auto res = std::from_chars(first, last, v, std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != last) throw FormatError("checkpoint: bad value '" + w + "' in " + name);
  return neg ? -v : v;
}

Matrix<double> read_matrix(std::istream& is, const std::string& tag, const std::string& name,
                           const Matrix<double>& like) {
  expect_tag(is, tag);
  const auto got = expect_word(is, "name");
  if (got != name) throw FormatError("checkpoint: expected " + tag + " '" + name + "', found '" + got + "'");
  const long rows = read_long(is, "rows");
  const long cols = read_long(is, "cols");
  if (rows != like.rows() || cols != like.cols()) {
    throw FormatError("checkpoint: " + name + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                      ", model expects " + std::to_string(like.rows()) + "x" + std::to_string(like.cols()));
  }
  Matrix<double> m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) m(r, c) = read_hex(is, name);
  }
  return m;
}

}  // namespace

diffnet::RmsProp<double> Checkpoint::optimizer(const diffnet::RmsPropConfig& config) const {
  diffnet::RmsProp<double> opt(model.params, config);
  if (!mean_square.empty()) {
    opt.mean_square() = mean_square;
    opt.set_steps(optimizer_steps);
  }
  return opt;
}

Checkpoint make_checkpoint(int epoch, std::string config_json, const Model& model,
                           const diffnet::RmsProp<double>* optimizer) {
  Checkpoint c;
  c.epoch = epoch;
  c.config_json = std::move(config_json);
  c.model = model;
  if (optimizer) {
    c.mean_square = optimizer->mean_square();
    c.optimizer_steps = optimizer->steps();
  }
  return c;
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  const auto& shape = ckpt.model.shape;
  os << "ic3net-checkpoint " << ckpt.version << '\n';
  os << "epoch " << ckpt.epoch << '\n';
  os << "shape " << shape.obs_dim << ' ' << shape.num_actions << ' ' << shape.hidden << ' ' << (shape.skip ? 1 : 0)
     << '\n';
  os << "config " << ckpt.config_json.size() << '\n' << ckpt.config_json << '\n';
  os << "params " << ckpt.model.params.size() << '\n';
  for (const auto& p : ckpt.model.params) write_matrix(os, "param", p.name, p.value);
  os << "optimizer " << (ckpt.mean_square.empty() ? 0 : 1) << ' ' << ckpt.optimizer_steps << '\n';
  for (std::size_t i = 0; i < ckpt.mean_square.size(); ++i) {
    write_matrix(os, "ms", ckpt.model.params[i].name, ckpt.mean_square[i]);
  }
  os << "end\n";
}

Checkpoint read_checkpoint(std::istream& is) {
  Checkpoint c;
  expect_tag(is, "ic3net-checkpoint");
  c.version = static_cast<int>(read_long(is, "version"));
  if (c.version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(c.version));
  }
  expect_tag(is, "epoch");
  c.epoch = static_cast<int>(read_long(is, "epoch"));
  expect_tag(is, "shape");
  const int obs = static_cast<int>(read_long(is, "obs_dim"));
  const int actions = static_cast<int>(read_long(is, "num_actions"));
  const int hidden = static_cast<int>(read_long(is, "hidden"));
  const bool skip = read_long(is, "skip") != 0;
  expect_tag(is, "config");
  const long len = read_long(is, "config length");
  is.get();
  c.config_json.resize(static_cast<std::size_t>(len));
  if (!is.read(c.config_json.data(), len)) throw FormatError("checkpoint: truncated config");

  c.model = policy::build_model<double>(obs, actions, hidden, 0, skip);
  expect_tag(is, "params");
  const long count = read_long(is, "parameter count");
  if (count != static_cast<long>(c.model.params.size())) {
    throw FormatError("checkpoint: " + std::to_string(count) + " parameters, model has " +
                      std::to_string(c.model.params.size()));
  }
  for (auto& p : c.model.params) p.value = read_matrix(is, "param", p.name, p.value);
  expect_tag(is, "optimizer");
  const bool has_opt = read_long(is, "optimizer flag") != 0;
  c.optimizer_steps = read_long(is, "optimizer steps");
  if (has_opt) {
    for (const auto& p : c.model.params) c.mean_square.push_back(read_matrix(is, "ms", p.name, p.value));
  }
  expect_tag(is, "end");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    write_checkpoint(os, ckpt);
    if (!os) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace ic3net::train
