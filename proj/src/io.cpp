#include "cpcstar/io.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace cpcstar {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& path, const std::string& why) {
  throw ParseError("parse error at " + path + ": " + why);
}

const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) parse_fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) parse_fail(path + "." + key, "missing field");
  return *it;
}

int require_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) parse_fail(path, "expected an integer");
  return j.get<int>();
}

Complex parse_complex(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    parse_fail(path, "expected a [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

json emit_complex(Complex c) { return json::array({c.real(), c.imag()}); }

Matrix parse_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) parse_fail(path, "expected a matrix (array of rows)");
  const size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) parse_fail(path + "[0]", "expected a row");
  const size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      parse_fail(path + "[" + std::to_string(r) + "]", "ragged matrix rows");
    for (size_t c = 0; c < cols; ++c)
      m(r, c) = parse_complex(j[r][c],
                              path + "[" + std::to_string(r) + "][" +
                                  std::to_string(c) + "]");
  }
  return m;
}

json emit_matrix(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(emit_complex(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

AlgebraShape parse_shape(const json& j, const std::string& path) {
  const json& blocks = require(j, "blocks", path);
  if (!blocks.is_array() || blocks.empty())
    parse_fail(path + ".blocks", "expected a non-empty array of sides");
  std::vector<int> sides;
  for (size_t i = 0; i < blocks.size(); ++i)
    sides.push_back(require_int(blocks[i],
                                path + ".blocks[" + std::to_string(i) + "]"));
  try {
    return AlgebraShape(std::move(sides));
  } catch (const ShapeError& e) {
    parse_fail(path, e.what());
  }
}

json emit_shape(const AlgebraShape& shape) {
  return json{{"blocks", shape.blocks}};
}

Element parse_element(const json& j, const AlgebraShape& shape,
                      const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != shape.num_blocks())
    parse_fail(path, "expected " + std::to_string(shape.num_blocks()) +
                         " blocks");
  std::vector<Matrix> blocks;
  for (size_t b = 0; b < j.size(); ++b)
    blocks.push_back(parse_matrix(j[b], path + "[" + std::to_string(b) + "]"));
  try {
    return Element(shape, std::move(blocks));
  } catch (const ShapeError& e) {
    parse_fail(path, e.what());
  }
}

json emit_element(const Element& e) {
  json blocks = json::array();
  for (const auto& blk : e.blocks) blocks.push_back(emit_matrix(blk));
  return blocks;
}

CpMap parse_map(const json& j, const AlgebraShape& domain,
                const AlgebraShape& codomain, const std::string& path) {
  const json& form = require(j, "form", path);
  if (form == "matrix") {
    Matrix action = parse_matrix(require(j, "data", path), path + ".data");
    try {
      return CpMap::from_action(domain, codomain, std::move(action));
    } catch (const ShapeError& e) {
      parse_fail(path, e.what());
    }
  }
  if (form == "kraus") {
    const json& blocks = require(j, "blocks", path);
    if (!blocks.is_array()) parse_fail(path + ".blocks", "expected an array");
    std::vector<KrausBlock> kraus;
    for (size_t b = 0; b < blocks.size(); ++b) {
      const std::string bpath = path + ".blocks[" + std::to_string(b) + "]";
      KrausBlock kb;
      kb.from = require_int(require(blocks[b], "from", bpath), bpath + ".from");
      kb.to = require_int(require(blocks[b], "to", bpath), bpath + ".to");
      const json& ops = require(blocks[b], "ops", bpath);
      if (!ops.is_array()) parse_fail(bpath + ".ops", "expected an array");
      for (size_t o = 0; o < ops.size(); ++o)
        kb.ops.push_back(
            parse_matrix(ops[o], bpath + ".ops[" + std::to_string(o) + "]"));
      kraus.push_back(std::move(kb));
    }
    try {
      return CpMap::from_kraus(domain, codomain, std::move(kraus));
    } catch (const ShapeError& e) {
      parse_fail(path, e.what());
    }
  }
  parse_fail(path + ".form", "expected \"matrix\" or \"kraus\"");
}

json emit_map(const CpMap& f) {
  if (f.has_kraus()) {
    json blocks = json::array();
    for (const auto& kb : f.kraus()) {
      json ops = json::array();
      for (const auto& op : kb.ops) ops.push_back(emit_matrix(op));
      blocks.push_back(
          json{{"from", kb.from}, {"to", kb.to}, {"ops", std::move(ops)}});
    }
    return json{{"form", "kraus"}, {"blocks", std::move(blocks)}};
  }
  return json{{"form", "matrix"}, {"data", emit_matrix(f.action_matrix())}};
}

std::vector<AlgebraShape> parse_stages(const json& doc,
                                       const std::string& root) {
  const json& jstages = require(doc, "stages", root);
  if (!jstages.is_array() || jstages.empty())
    parse_fail(root + ".stages", "expected a non-empty array");
  std::vector<AlgebraShape> stages;
  for (size_t n = 0; n < jstages.size(); ++n)
    stages.push_back(
        parse_shape(jstages[n], root + ".stages[" + std::to_string(n) + "]"));
  return stages;
}

}  // namespace

ParsedDocument parse_system_document(const std::string& text,
                                     const Tolerances& tol) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  const std::string root = "$";
  const json& kind = require(doc, "kind", root);
  std::string name = doc.value("name", std::string("unnamed"));

  if (kind == "system") {
    auto stages = parse_stages(doc, root);
    const json& jsteps = require(doc, "steps", root);
    if (!jsteps.is_array() ||
        jsteps.size() + 1 != stages.size())
      parse_fail(root + ".steps", "expected " +
                                      std::to_string(stages.size() - 1) +
                                      " steps for " +
                                      std::to_string(stages.size()) +
                                      " stages");
    std::vector<CpMap> steps;
    for (size_t n = 0; n < jsteps.size(); ++n)
      steps.push_back(parse_map(jsteps[n], stages[n], stages[n + 1],
                                root + ".steps[" + std::to_string(n) + "]"));
    return InductiveSystem::validated(std::move(name), std::move(stages),
                                      std::move(steps), tol);
  }

  if (kind == "cpap") {
    CpapSystem cpap;
    cpap.name = name;
    cpap.algebra = parse_shape(require(doc, "algebra", root), root + ".algebra");
    cpap.stages = parse_stages(doc, root);
    const json& jpsi = require(doc, "psi", root);
    const json& jphi = require(doc, "phi", root);
    if (!jpsi.is_array() || jpsi.size() != cpap.stages.size())
      parse_fail(root + ".psi", "expected one map per stage");
    if (!jphi.is_array() || jphi.size() != cpap.stages.size())
      parse_fail(root + ".phi", "expected one map per stage");
    for (size_t n = 0; n < cpap.stages.size(); ++n) {
      cpap.down.push_back(parse_map(jpsi[n], cpap.algebra, cpap.stages[n],
                                    root + ".psi[" + std::to_string(n) + "]"));
      cpap.up.push_back(parse_map(jphi[n], cpap.stages[n], cpap.algebra,
                                  root + ".phi[" + std::to_string(n) + "]"));
    }
    const json& jprobes = require(doc, "probes", root);
    if (!jprobes.is_array() || jprobes.empty())
      parse_fail(root + ".probes", "expected a non-empty array");
    for (size_t p = 0; p < jprobes.size(); ++p)
      cpap.probes.push_back(parse_element(
          jprobes[p], cpap.algebra, root + ".probes[" + std::to_string(p) + "]"));
    if (doc.contains("probe_labels")) {
      for (const auto& l : doc["probe_labels"])
        cpap.probe_labels.push_back(l.get<std::string>());
      if (cpap.probe_labels.size() != cpap.probes.size())
        parse_fail(root + ".probe_labels", "label count mismatch");
    }
    cpap.validate(tol);
    cpap.record_approx_defects();
    return cpap;
  }

  parse_fail(root + ".kind", "expected \"system\" or \"cpap\"");
}

std::string emit_system_document(const InductiveSystem& sys) {
  json doc;
  doc["version"] = 1;
  doc["kind"] = "system";
  doc["name"] = sys.name();
  json stages = json::array();
  for (const auto& s : sys.stages()) stages.push_back(emit_shape(s));
  doc["stages"] = std::move(stages);
  json steps = json::array();
  for (const auto& f : sys.steps()) steps.push_back(emit_map(f));
  doc["steps"] = std::move(steps);
  return doc.dump(2) + "\n";
}

std::string emit_system_document(const CpapSystem& cpap) {
  json doc;
  doc["version"] = 1;
  doc["kind"] = "cpap";
  doc["name"] = cpap.name;
  doc["algebra"] = emit_shape(cpap.algebra);
  json stages = json::array();
  for (const auto& s : cpap.stages) stages.push_back(emit_shape(s));
  doc["stages"] = std::move(stages);
  json psi = json::array(), phi = json::array();
  for (const auto& f : cpap.down) psi.push_back(emit_map(f));
  for (const auto& f : cpap.up) phi.push_back(emit_map(f));
  doc["psi"] = std::move(psi);
  doc["phi"] = std::move(phi);
  json probes = json::array();
  for (const auto& p : cpap.probes) probes.push_back(emit_element(p));
  doc["probes"] = std::move(probes);
  if (!cpap.probe_labels.empty()) doc["probe_labels"] = cpap.probe_labels;
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Builtin registry

namespace {

struct DescriptorParser {
  const std::string& text;
  size_t pos = 0;

  explicit DescriptorParser(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c))
      throw ParseError("builtin descriptor: expected '" + std::string(1, c) +
                       "' at position " + std::to_string(pos) + " in \"" +
                       text + "\"");
  }

  std::string ident() {
    skip_ws();
    size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) ||
            text[pos] == '_'))
      ++pos;
    if (start == pos)
      throw ParseError("builtin descriptor: expected a name in \"" + text +
                       "\"");
    return text.substr(start, pos - start);
  }

  double number() {
    skip_ws();
    size_t end;
    double v;
    try {
      v = std::stod(text.substr(pos), &end);
    } catch (const std::exception&) {
      throw ParseError("builtin descriptor: expected a number at position " +
                       std::to_string(pos) + " in \"" + text + "\"");
    }
    pos += end;
    return v;
  }

  std::vector<double> number_list() {
    expect('[');
    std::vector<double> values;
    if (!eat(']')) {
      do {
        values.push_back(number());
      } while (eat(','));
      expect(']');
    }
    return values;
  }
};

ParsedDocument build_descriptor(DescriptorParser& p);

ParsedDocument build_named(DescriptorParser& p, const std::string& name) {
  p.expect('{');
  if (name == "uhf") {
    const int base = static_cast<int>(p.number());
    p.expect(',');
    const int depth = static_cast<int>(p.number());
    p.expect('}');
    return uhf_system(base, depth);
  }
  if (name == "weighted") {
    const int depth = static_cast<int>(p.number());
    p.expect(',');
    const auto gammas = p.number_list();
    p.expect('}');
    return weighted_embedding_system(depth, gammas);
  }
  if (name == "interval" || name == "interval_cpap") {
    const auto sizes = p.number_list();
    p.expect('}');
    std::vector<int> grids;
    for (double v : sizes) grids.push_back(static_cast<int>(v));
    IntervalModel model = interval_sampling_system(grids);
    if (name == "interval") return std::move(model.system);
    return std::move(model.cpap);
  }
  if (name == "exact_cpap") {
    const auto sides = p.number_list();
    p.expect(',');
    const int stages = static_cast<int>(p.number());
    p.expect('}');
    std::vector<int> blocks;
    for (double v : sides) blocks.push_back(static_cast<int>(v));
    return exact_cpap(AlgebraShape(blocks), stages);
  }
  if (name == "nf_lift") {
    ParsedDocument inner = build_descriptor(p);
    p.expect('}');
    if (!std::holds_alternative<InductiveSystem>(inner))
      throw ParseError("nf_lift expects an inductive system argument");
    return direct_sum_nf_lift(std::get<InductiveSystem>(inner));
  }
  throw ParseError("unknown builtin '" + name + "'");
}

ParsedDocument build_descriptor(DescriptorParser& p) {
  return build_named(p, p.ident());
}

}  // namespace

ParsedDocument build_builtin(const std::string& descriptor) {
  DescriptorParser p(descriptor);
  ParsedDocument doc = build_descriptor(p);
  p.skip_ws();
  if (p.pos != descriptor.size())
    throw ParseError("builtin descriptor: trailing characters in \"" +
                     descriptor + "\"");
  return doc;
}

std::string emit_builtin_example(const std::string& descriptor) {
  ParsedDocument doc = build_builtin(descriptor);
  if (std::holds_alternative<InductiveSystem>(doc))
    return emit_system_document(std::get<InductiveSystem>(doc));
  return emit_system_document(std::get<CpapSystem>(doc));
}

// ---------------------------------------------------------------------------
// Structural comparison

namespace {

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same_map(const CpMap& a, const CpMap& b) {
  if (a.domain() != b.domain() || a.codomain() != b.codomain()) return false;
  if (a.has_kraus() != b.has_kraus()) return false;
  if (a.has_kraus()) {
    if (a.kraus().size() != b.kraus().size()) return false;
    for (size_t i = 0; i < a.kraus().size(); ++i) {
      const auto& ka = a.kraus()[i];
      const auto& kb = b.kraus()[i];
      if (ka.from != kb.from || ka.to != kb.to ||
          ka.ops.size() != kb.ops.size())
        return false;
      for (size_t o = 0; o < ka.ops.size(); ++o)
        if (!same_matrix(ka.ops[o], kb.ops[o])) return false;
    }
    return true;
  }
  return same_matrix(a.action_matrix(), b.action_matrix());
}

}  // namespace

bool structurally_equal(const InductiveSystem& a, const InductiveSystem& b) {
  if (a.name() != b.name() || a.stages() != b.stages() ||
      a.steps().size() != b.steps().size())
    return false;
  for (size_t n = 0; n < a.steps().size(); ++n)
    if (!same_map(a.steps()[n], b.steps()[n])) return false;
  return true;
}

bool structurally_equal(const CpapSystem& a, const CpapSystem& b) {
  if (a.name != b.name || a.algebra != b.algebra || a.stages != b.stages ||
      a.down.size() != b.down.size() || a.probes.size() != b.probes.size())
    return false;
  for (size_t n = 0; n < a.down.size(); ++n)
    if (!same_map(a.down[n], b.down[n]) || !same_map(a.up[n], b.up[n]))
      return false;
  for (size_t p = 0; p < a.probes.size(); ++p) {
    if (a.probes[p].shape != b.probes[p].shape) return false;
    for (int blk = 0; blk < a.probes[p].num_blocks(); ++blk)
      if (!same_matrix(a.probes[p].blocks[blk], b.probes[p].blocks[blk]))
        return false;
  }
  return a.probe_labels == b.probe_labels;
}

// ---------------------------------------------------------------------------
// CSV

std::string emit_csv(const DefectReport& report) {
  std::ostringstream os;
  for (const auto& [key, value] : report.metadata)
    os << "# " << key << ": " << value << "\n";
  os << "kind,k,m,n,l,pair,value\n";
  char buf[64];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.value);
    os << e.kind << "," << e.k << "," << e.m << "," << e.n << "," << e.l << ","
       << e.pair << "," << buf << "\n";
  }
  return os.str();
}

std::string emit_element_literal(const Element& e) {
  return emit_element(e).dump();
}

Element parse_element_literal(const std::string& text,
                              const AlgebraShape& shape) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("invalid element literal: ") + ex.what());
  }
  return parse_element(j, shape, "$");
}

}  // namespace cpcstar
