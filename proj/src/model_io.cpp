#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "homrf/errors.hpp"
#include "homrf/model.hpp"

namespace homrf {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& tok) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  const auto res = std::from_chars(begin, end, v);
  require(res.ec == std::errc() && res.ptr == end, ErrorKind::parse, "bad real: '" + tok + "'");
  return v;
}

namespace {

// Whitespace tokenizer that remembers line numbers for parse errors.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string next(const char* what) {
    while (true) {
      if (pos_ >= line_.size()) {
        if (!std::getline(in_, line_)) {
          fail(ErrorKind::parse, std::string("unexpected end of file: expected ") + what);
        }
        ++lineno_;
        pos_ = 0;
        continue;
      }
      while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
      if (pos_ >= line_.size()) continue;
      std::size_t start = pos_;
      while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
      return line_.substr(start, pos_ - start);
    }
  }

  long long next_int(const char* what) {
    const std::string tok = next(what);
    long long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      fail(ErrorKind::parse, err_at() + "expected integer " + what + ", got '" + tok + "'");
    }
    return v;
  }

  double next_real(const char* what) {
    const std::string tok = next(what);
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      fail(ErrorKind::parse, err_at() + "expected real " + what + ", got '" + tok + "'");
    }
    return v;
  }

  std::string err_at() const { return "line " + std::to_string(lineno_) + ": "; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t pos_ = 0;
  int lineno_ = 0;
};

}  // namespace

MrfModel load_model(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::invalid_input, "cannot open model file: " + path);
  Reader r(in);

  const std::string magic = r.next("header");
  require(magic == "HOMRF", ErrorKind::parse, "bad header: expected HOMRF");
  const long long version = r.next_int("format version");
  require(version == 1, ErrorKind::parse, "unsupported format version");

  MrfModel m;
  m.node_count = static_cast<int>(r.next_int("node count"));
  require(m.node_count >= 0, ErrorKind::parse, "negative node count");
  m.labels.resize(static_cast<std::size_t>(m.node_count));
  for (int i = 0; i < m.node_count; ++i) {
    m.labels[static_cast<std::size_t>(i)] = static_cast<int>(r.next_int("label count"));
  }
  m.unaries.resize(static_cast<std::size_t>(m.node_count));
  for (int i = 0; i < m.node_count; ++i) {
    auto& u = m.unaries[static_cast<std::size_t>(i)];
    u.resize(static_cast<std::size_t>(m.labels[static_cast<std::size_t>(i)]));
    for (auto& v : u) v = r.next_real("unary value");
  }
  const long long ncliq = r.next_int("clique count");
  require(ncliq >= 0, ErrorKind::parse, "negative clique count");
  for (long long c = 0; c < ncliq; ++c) {
    Clique cl;
    const long long k = r.next_int("clique order");
    require(k >= 2, ErrorKind::parse, r.err_at() + "clique order must be >= 2");
    cl.nodes.resize(static_cast<std::size_t>(k));
    for (auto& v : cl.nodes) {
      v = static_cast<int>(r.next_int("clique node id"));
      require(v >= 0 && v < m.node_count, ErrorKind::parse, r.err_at() + "clique node id out of range");
    }
    std::vector<int> dims(cl.nodes.size());
    for (std::size_t a = 0; a < cl.nodes.size(); ++a)
      dims[a] = m.labels[static_cast<std::size_t>(cl.nodes[a])];
    const CliqueShape sh = make_shape(dims);

    const std::string kind = r.next("potential kind");
    if (kind == "DENSE") {
      DensePotential d;
      d.values.resize(static_cast<std::size_t>(sh.domain));
      for (auto& v : d.values) v = r.next_real("dense value");
      cl.potential = std::move(d);
    } else if (kind == "PATTERN") {
      const long long s = r.next_int("pattern size");
      require(s >= 0, ErrorKind::parse, r.err_at() + "negative pattern size");
      PatternPotential p;
      p.default_value = r.next_real("pattern default");
      std::vector<std::pair<std::uint64_t, double>> entries;
      std::vector<int> lab(cl.nodes.size());
      for (long long e = 0; e < s; ++e) {
        for (std::size_t a = 0; a < cl.nodes.size(); ++a) {
          lab[a] = static_cast<int>(r.next_int("pattern label"));
          require(lab[a] >= 0 && lab[a] < dims[a], ErrorKind::parse,
                  r.err_at() + "pattern label out of range");
        }
        entries.emplace_back(sh.key_of(lab), r.next_real("pattern value"));
      }
      std::sort(entries.begin(), entries.end());
      for (std::size_t e = 0; e < entries.size(); ++e) {
        require(e == 0 || entries[e - 1].first != entries[e].first, ErrorKind::parse,
                "duplicate pattern labeling");
        p.keys.push_back(entries[e].first);
        p.values.push_back(entries[e].second);
      }
      cl.potential = std::move(p);
    } else {
      fail(ErrorKind::parse, r.err_at() + "unknown potential kind '" + kind + "'");
    }
    m.cliques.push_back(std::move(cl));
  }
  m.validate();
  return m;
}

void save_model(const MrfModel& model, const std::string& path) {
  model.validate();
  std::ostringstream out;
  out << "HOMRF 1\n" << model.node_count << "\n";
  for (int i = 0; i < model.node_count; ++i) {
    out << model.labels[static_cast<std::size_t>(i)] << (i + 1 == model.node_count ? "\n" : " ");
  }
  if (model.node_count == 0) out << "\n";
  for (const auto& u : model.unaries) {
    for (std::size_t x = 0; x < u.size(); ++x) out << format_double(u[x]) << (x + 1 == u.size() ? "" : " ");
    out << "\n";
  }
  out << model.cliques.size() << "\n";
  for (std::size_t c = 0; c < model.cliques.size(); ++c) {
    const Clique& cl = model.cliques[c];
    out << cl.order();
    for (int v : cl.nodes) out << " " << v;
    out << "\n";
    const CliqueShape sh = model.shape(static_cast<int>(c));
    if (const auto* d = std::get_if<DensePotential>(&cl.potential)) {
      out << "DENSE";
      for (double v : d->values) out << " " << format_double(v);
      out << "\n";
    } else {
      const auto& p = std::get<PatternPotential>(cl.potential);
      out << "PATTERN " << p.size() << " " << format_double(p.default_value) << "\n";
      std::vector<int> lab(cl.nodes.size());
      for (std::size_t e = 0; e < p.keys.size(); ++e) {
        sh.labels_of(p.keys[e], lab);
        for (int v : lab) out << v << " ";
        out << format_double(p.values[e]) << "\n";
      }
    }
  }
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::invalid_input, "cannot open output file: " + path);
  f << out.str();
  require(f.good(), ErrorKind::invalid_input, "write failed: " + path);
}

}  // namespace homrf
