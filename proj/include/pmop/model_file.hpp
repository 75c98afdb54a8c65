#pragma once

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dataio.hpp"
#include "loss.hpp"
#include "text.hpp"

namespace pmop {

/// Versioned line-oriented model artifact:
///
///   rank-model v1
///   loss <name>
///   features <F>
///   w <idx> <val>        one per non-zero weight, 1-based
///   alpha <val>          tie models only
///   beta <val>
///   pipeline <path>      feature pipeline, relative to the model file
struct ModelFile {
  std::string loss;
  std::vector<double> weights;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::string> pipeline;

  std::size_t feature_count() const { return weights.size(); }

  friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

inline void write_model(std::ostream& out, const ModelFile& m) {
  out << "rank-model v1\n";
  out << "loss " << m.loss << "\n";
  out << "features " << m.weights.size() << "\n";
  for (std::size_t f = 0; f < m.weights.size(); ++f)
    if (m.weights[f] != 0.0) out << "w " << (f + 1) << ' ' << format_real(m.weights[f]) << "\n";
  if (m.alpha) out << "alpha " << format_real(*m.alpha) << "\n";
  if (m.beta) out << "beta " << format_real(*m.beta) << "\n";
  if (m.pipeline) out << "pipeline " << *m.pipeline << "\n";
}

inline ModelFile read_model(std::istream& in, const std::string& source = "<model>") {
  std::string line;
  std::size_t line_no = 0;
  auto next_tokens = [&]() -> std::optional<std::vector<std::string_view>> {
    while (std::getline(in, line)) {
      ++line_no;
      auto tok = split_ws(line);
      if (!tok.empty()) return tok;
    }
    return std::nullopt;
  };
  auto fail = [&](const std::string& what) { return ParseError(source, line_no, what); };

  auto tok = next_tokens();
  if (!tok || *tok != std::vector<std::string_view>{"rank-model", "v1"}) throw fail("expected header 'rank-model v1'");
  tok = next_tokens();
  if (!tok || tok->size() != 2 || (*tok)[0] != "loss") throw fail("expected 'loss <name>'");
  ModelFile m;
  m.loss = std::string((*tok)[1]);
  if (!is_known_loss(m.loss)) throw fail("unknown loss '" + m.loss + "'");
  tok = next_tokens();
  if (!tok || tok->size() != 2 || (*tok)[0] != "features") throw fail("expected 'features <F>'");
  const auto F = parse_int<std::size_t>((*tok)[1]);
  if (!F) throw fail("bad feature count");
  m.weights.assign(*F, 0.0);

  std::vector<char> seen(*F, 0);
  while ((tok = next_tokens())) {
    const auto& t = *tok;
    if (t[0] == "w" && t.size() == 3) {
      const auto idx = parse_int<std::size_t>(t[1]);
      const auto v = parse_real(t[2]);
      if (!idx || !v || *idx == 0 || *idx > *F) throw fail("bad weight line");
      if (seen[*idx - 1]) throw fail("duplicate weight index " + std::to_string(*idx));
      seen[*idx - 1] = 1;
      m.weights[*idx - 1] = *v;
    } else if ((t[0] == "alpha" || t[0] == "beta") && t.size() == 2) {
      const auto v = parse_real(t[1]);
      if (!v) throw fail("bad " + std::string(t[0]) + " value");
      (t[0] == "alpha" ? m.alpha : m.beta) = *v;
    } else if (t[0] == "pipeline" && t.size() == 2) {
      m.pipeline = std::string(t[1]);
    } else {
      throw fail("unrecognised model line '" + line + "'");
    }
  }
  if (m.loss == "ties-rk" && !m.alpha) throw ParseError(source + ": ties-rk model without an alpha line");
  if (m.loss == "ties-d" && !m.beta) throw ParseError(source + ": ties-d model without a beta line");
  return m;
}

inline ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  return read_model(in, path);
}

}  // namespace pmop
