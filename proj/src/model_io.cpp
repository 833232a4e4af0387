#include "closedlink/model_io.hpp"

#include <charconv>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "closedlink/errors.hpp"

namespace closedlink {
namespace {

struct Location {
  int line = 1;
  int column = 1;
};

[[noreturn]] void fail(ErrorCode code, const Location& at, const std::string& what) {
  throw ParseError(code, at.line, at.column, what);
}

// ---------------------------------------------------------------------------
// .mech tokens

enum class Tok { kWord, kOpen, kClose, kColon, kEnd, kEof };

struct Token {
  Tok kind;
  std::string text;
  Location at;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  Location at;
  size_t i = 0;
  const auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++at.line;
        at.column = 1;
      } else {
        ++at.column;
      }
    }
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
    } else if (c == '\n' || c == ';') {
      out.push_back({Tok::kEnd, std::string(1, c), at});
      advance(1);
    } else if (c == ' ' || c == '\t' || c == '\r') {
      advance(1);
    } else if (c == '{' || c == '}' || c == ':') {
      out.push_back({c == '{' ? Tok::kOpen : c == '}' ? Tok::kClose : Tok::kColon, std::string(1, c), at});
      advance(1);
    } else {
      const Location start = at;
      size_t j = i;
      while (j < text.size() && std::string_view(" \t\r\n;{}:#").find(text[j]) == std::string_view::npos) ++j;
      out.push_back({Tok::kWord, std::string(text.substr(i, j - i)), start});
      advance(j - i);
    }
  }
  out.push_back({Tok::kEof, "", at});
  return out;
}

struct Property {
  Token key;
  std::vector<Token> values;
};

struct Block {
  Token keyword;
  Token name;
  std::vector<Property> properties;
};

struct Statements {
  std::vector<Property> top;
  std::vector<Block> blocks;
  std::vector<Token> selections;
};

class StatementParser {
 public:
  explicit StatementParser(std::vector<Token> tokens) : t_(std::move(tokens)) {}

  Statements parse() {
    Statements out;
    while (true) {
      skip_ends();
      const Token& head = peek();
      if (head.kind == Tok::kEof) break;
      expect_word(head, "statement");
      if (peek(1).kind == Tok::kColon) {
        out.top.push_back(property());
      } else if (head.text == "select") {
        next();
        while (peek().kind == Tok::kWord) out.selections.push_back(next());
        end_of_statement();
      } else {
        Block b{next(), {}, {}};
        b.name = next();
        expect_word(b.name, "block name");
        if (peek().kind != Tok::kOpen) fail(ErrorCode::kSyntaxError, peek().at, "expected '{' after block name");
        next();
        while (true) {
          skip_ends();
          if (peek().kind == Tok::kClose) {
            next();
            break;
          }
          if (peek().kind == Tok::kEof) fail(ErrorCode::kSyntaxError, b.keyword.at, "unterminated block '" + b.name.text + "'");
          b.properties.push_back(property());
        }
        end_of_statement();
        out.blocks.push_back(std::move(b));
      }
    }
    return out;
  }

 private:
  const Token& peek(size_t ahead = 0) const { return t_[std::min(pos_ + ahead, t_.size() - 1)]; }
  Token next() { return t_[std::min(pos_++, t_.size() - 1)]; }
  void skip_ends() {
    while (peek().kind == Tok::kEnd) next();
  }
  static void expect_word(const Token& tok, const char* what) {
    if (tok.kind != Tok::kWord) fail(ErrorCode::kSyntaxError, tok.at, std::string("expected ") + what + ", found '" + tok.text + "'");
  }
  void end_of_statement() {
    const Token& tok = peek();
    if (tok.kind == Tok::kEnd) {
      next();
    } else if (tok.kind != Tok::kEof && tok.kind != Tok::kClose) {
      fail(ErrorCode::kSyntaxError, tok.at, "unexpected '" + tok.text + "'");
    }
  }
  Property property() {
    Property p{next(), {}};
    expect_word(p.key, "key");
    if (peek().kind != Tok::kColon) fail(ErrorCode::kSyntaxError, peek().at, "expected ':' after '" + p.key.text + "'");
    next();
    while (peek().kind == Tok::kWord) p.values.push_back(next());
    if (p.values.empty()) fail(ErrorCode::kSyntaxError, p.key.at, "missing value for '" + p.key.text + "'");
    end_of_statement();
    return p;
  }

  std::vector<Token> t_;
  size_t pos_ = 0;
};

double to_double(const Token& tok) {
  const char* begin = tok.text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE) fail(ErrorCode::kSyntaxError, tok.at, "invalid number '" + tok.text + "'");
  return v;
}

// Typed view over the properties of one block; rejects unknown and repeated keys.
class PropertyReader {
 public:
  PropertyReader(const std::vector<Property>& props, std::set<std::string> allowed) {
    for (const auto& p : props) {
      if (!allowed.count(p.key.text)) fail(ErrorCode::kSyntaxError, p.key.at, "unknown key '" + p.key.text + "'");
      if (!by_key_.emplace(p.key.text, &p).second) fail(ErrorCode::kSyntaxError, p.key.at, "repeated key '" + p.key.text + "'");
    }
  }

  const Property* find(const std::string& key) const {
    const auto it = by_key_.find(key);
    return it == by_key_.end() ? nullptr : it->second;
  }
  const Property& required(const std::string& key, const Token& owner) const {
    const Property* p = find(key);
    if (!p) fail(ErrorCode::kSyntaxError, owner.at, "'" + owner.text + "' is missing '" + key + "'");
    return *p;
  }
  static void count(const Property& p, size_t n) {
    if (p.values.size() != n) {
      fail(ErrorCode::kSyntaxError, p.key.at,
           "'" + p.key.text + "' expects " + std::to_string(n) + " values, found " + std::to_string(p.values.size()));
    }
  }
  std::string word(const std::string& key, const Token& owner, std::optional<std::string> fallback = {}) const {
    const Property* p = fallback ? find(key) : &required(key, owner);
    if (!p) return *fallback;
    count(*p, 1);
    return p->values[0].text;
  }
  double number(const std::string& key, double fallback) const {
    const Property* p = find(key);
    if (!p) return fallback;
    count(*p, 1);
    return to_double(p->values[0]);
  }
  Vec3 vec3(const std::string& key, const Vec3& fallback) const {
    const Property* p = find(key);
    if (!p) return fallback;
    count(*p, 3);
    return Vec3(to_double(p->values[0]), to_double(p->values[1]), to_double(p->values[2]));
  }
  Location at(const std::string& key, const Token& owner) const {
    const Property* p = find(key);
    return p ? p->values[0].at : owner.at;
  }

 private:
  std::map<std::string, const Property*> by_key_;
};

const std::array<const char*, 6> kDirectionNames = {"x", "y", "z", "rx", "ry", "rz"};

const char* joint_type_name(JointType t) {
  switch (t) {
    case JointType::kRevolute: return "revolute";
    case JointType::kPrismatic: return "prismatic";
    case JointType::kFloating: return "floating";
  }
  return "revolute";
}

// Source locations of every named record, for semantic errors after parsing.
struct Locations {
  std::vector<Location> links, joints, frames, loops, contacts, actuators, selection;
  std::map<std::pair<std::string, std::string>, Location> fields;  // (record, key) -> value location
};

void validate(const MechanismDocument& doc, const Locations& loc) {
  const auto field = [&](const std::string& record, const std::string& key, const Location& fallback) {
    const auto it = loc.fields.find({record, key});
    return it == loc.fields.end() ? fallback : it->second;
  };
  std::set<std::string> link_names, frame_space, joint_names;
  for (size_t i = 0; i < doc.links.size(); ++i) {
    const auto& name = doc.links[i].name;
    if (name == "world") fail(ErrorCode::kDuplicateName, loc.links[i], "'world' is reserved");
    if (!link_names.insert(name).second) fail(ErrorCode::kDuplicateName, loc.links[i], "duplicate link '" + name + "'");
    frame_space.insert(name);
  }
  for (size_t i = 0; i < doc.frames.size(); ++i) {
    const auto& name = doc.frames[i].name;
    if (!frame_space.insert(name).second) fail(ErrorCode::kDuplicateName, loc.frames[i], "duplicate frame '" + name + "'");
  }
  for (size_t i = 0; i < doc.joints.size(); ++i) {
    if (!joint_names.insert(doc.joints[i].name).second) {
      fail(ErrorCode::kDuplicateName, loc.joints[i], "duplicate joint '" + doc.joints[i].name + "'");
    }
  }
  std::set<std::string> names;
  for (size_t i = 0; i < doc.loops.size(); ++i) {
    if (!names.insert(doc.loops[i].name).second) fail(ErrorCode::kDuplicateName, loc.loops[i], "duplicate loop '" + doc.loops[i].name + "'");
  }
  names.clear();
  for (size_t i = 0; i < doc.contacts.size(); ++i) {
    if (!names.insert(doc.contacts[i].name).second) {
      fail(ErrorCode::kDuplicateName, loc.contacts[i], "duplicate contact '" + doc.contacts[i].name + "'");
    }
  }
  names.clear();
  for (size_t i = 0; i < doc.actuators.size(); ++i) {
    if (!names.insert(doc.actuators[i].joint).second) {
      fail(ErrorCode::kDuplicateName, loc.actuators[i], "duplicate actuator '" + doc.actuators[i].joint + "'");
    }
  }
  names.clear();
  for (size_t i = 0; i < doc.selection.size(); ++i) {
    if (!names.insert(doc.selection[i]).second) fail(ErrorCode::kDuplicateName, loc.selection[i], "duplicate selection '" + doc.selection[i] + "'");
  }

  const auto require_link = [&](const std::string& name, const Location& at) {
    if (!link_names.count(name)) fail(ErrorCode::kUnknownReference, at, "unknown link '" + name + "'");
  };
  for (size_t i = 0; i < doc.joints.size(); ++i) {
    const auto& j = doc.joints[i];
    const std::string key = "joint " + j.name;
    if (j.parent != "world") require_link(j.parent, field(key, "parent", loc.joints[i]));
    require_link(j.child, field(key, "child", loc.joints[i]));
    if (!(j.lower <= j.upper)) {
      fail(ErrorCode::kBadLimits, field(key, "limits", loc.joints[i]),
           "joint '" + j.name + "' has lower limit above upper limit");
    }
  }
  for (size_t i = 0; i < doc.frames.size(); ++i) {
    require_link(doc.frames[i].link, field("frame " + doc.frames[i].name, "link", loc.frames[i]));
  }
  for (size_t i = 0; i < doc.loops.size(); ++i) {
    const auto& l = doc.loops[i];
    const std::string key = "loop " + l.name;
    require_link(l.a_link, field(key, "a_link", loc.loops[i]));
    require_link(l.u_link, field(key, "u_link", loc.loops[i]));
    const auto rows = std::count(l.mask.begin(), l.mask.end(), true);
    if (rows == 0) fail(ErrorCode::kBadMask, field(key, "mask", loc.loops[i]), "loop '" + l.name + "' has an empty mask");
    if (static_cast<long>(l.constants.size()) != rows) {
      fail(ErrorCode::kBadMask, field(key, "constants", loc.loops[i]),
           "loop '" + l.name + "' needs one constant per masked direction");
    }
  }
  for (size_t i = 0; i < doc.contacts.size(); ++i) {
    require_link(doc.contacts[i].link, field("contact " + doc.contacts[i].name, "link", loc.contacts[i]));
  }
  for (size_t i = 0; i < doc.actuators.size(); ++i) {
    if (!joint_names.count(doc.actuators[i].joint)) {
      fail(ErrorCode::kUnknownReference, loc.actuators[i], "unknown joint '" + doc.actuators[i].joint + "'");
    }
  }
  for (size_t i = 0; i < doc.selection.size(); ++i) {
    if (!joint_names.count(doc.selection[i])) {
      fail(ErrorCode::kUnknownReference, loc.selection[i], "unknown joint '" + doc.selection[i] + "'");
    }
  }
}

// Shortest text that parses back to the same double.
std::string num(double value) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, r.ptr);
}

std::string vec_text(const Vec3& v) { return num(v.x()) + " " + num(v.y()) + " " + num(v.z()); }

// ---------------------------------------------------------------------------
// CSV helpers

struct CsvLine {
  int line;
  std::vector<std::string> fields;
};

// Splits into non-empty, non-comment lines of comma-separated fields.
std::vector<CsvLine> csv_lines(std::string_view text, bool& saw_format) {
  std::vector<CsvLine> out;
  saw_format = false;
  int line = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view row = text.substr(start, end - start);
    ++line;
    start = end + 1;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (row.front() == '#') {
      std::string body(row.substr(1));
      body.erase(std::remove(body.begin(), body.end(), ' '), body.end());
      if (body.rfind("format:", 0) == 0) {
        if (body != "format:1") fail(ErrorCode::kSyntaxError, {line, 1}, "unsupported format '" + body.substr(7) + "'");
        saw_format = true;
      }
      continue;
    }
    CsvLine l{line, {}};
    size_t f = 0;
    while (true) {
      const size_t comma = row.find(',', f);
      std::string_view cell = row.substr(f, comma == std::string_view::npos ? std::string_view::npos : comma - f);
      while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
      while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
      l.fields.emplace_back(cell);
      if (comma == std::string_view::npos) break;
      f = comma + 1;
    }
    out.push_back(std::move(l));
    if (end == text.size()) break;
  }
  return out;
}

int column_of(const CsvLine& l, size_t field) {
  int col = 1;
  for (size_t k = 0; k < field; ++k) col += static_cast<int>(l.fields[k].size()) + 1;
  return col;
}

double csv_double(const CsvLine& l, size_t field) {
  const std::string& s = l.fields[field];
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') fail(ErrorCode::kSyntaxError, {l.line, column_of(l, field)}, "invalid number '" + s + "'");
  return v;
}

std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (size_t k = 0; k < cells.size(); ++k) {
    if (k) out += ',';
    out += cells[k];
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

MechanismDocument parse_mechanism(std::string_view text) {
  const Statements st = StatementParser(tokenize(text)).parse();
  MechanismDocument doc;
  Locations loc;

  if (st.top.empty() || st.top.front().key.text != "format") {
    fail(ErrorCode::kSyntaxError, st.top.empty() ? Location{} : st.top.front().key.at, "document must start with 'format: 1'");
  }
  PropertyReader top(st.top, {"format", "name", "gravity"});
  const Property& format = top.required("format", st.top.front().key);
  PropertyReader::count(format, 1);
  if (format.values[0].text != "1") fail(ErrorCode::kSyntaxError, format.values[0].at, "unsupported format '" + format.values[0].text + "'");
  doc.format = 1;
  if (const Property* p = top.find("name")) {
    PropertyReader::count(*p, 1);
    doc.name = p->values[0].text;
  }
  doc.gravity = top.vec3("gravity", doc.gravity);

  for (const Block& b : st.blocks) {
    const std::string& kind = b.keyword.text;
    const std::string record = kind + " " + b.name.text;
    for (const auto& p : b.properties) loc.fields[{record, p.key.text}] = p.values[0].at;
    if (kind == "link") {
      PropertyReader r(b.properties, {"mass", "com", "inertia"});
      LinkRecord link{b.name.text, r.number("mass", 0.0), r.vec3("com", Vec3::Zero()), Mat3::Zero()};
      if (const Property* p = r.find("inertia")) {
        PropertyReader::count(*p, 6);
        double v[6];
        for (int k = 0; k < 6; ++k) v[k] = to_double(p->values[k]);
        link.inertia << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
      }
      doc.links.push_back(link);
      loc.links.push_back(b.name.at);
    } else if (kind == "joint") {
      PropertyReader r(b.properties, {"type", "parent", "child", "xyz", "rpy", "axis", "actuated", "limits", "home"});
      JointRecord j;
      j.name = b.name.text;
      const std::string type = r.word("type", b.name);
      if (type == "revolute") {
        j.type = JointType::kRevolute;
      } else if (type == "prismatic") {
        j.type = JointType::kPrismatic;
      } else if (type == "floating") {
        j.type = JointType::kFloating;
      } else {
        fail(ErrorCode::kSyntaxError, r.at("type", b.name), "unknown joint type '" + type + "'");
      }
      j.parent = r.word("parent", b.name);
      j.child = r.word("child", b.name);
      j.xyz = r.vec3("xyz", j.xyz);
      j.rpy = r.vec3("rpy", j.rpy);
      j.axis = r.vec3("axis", j.axis);
      const std::string actuated = r.word("actuated", b.name, std::string("false"));
      if (actuated != "true" && actuated != "false") {
        fail(ErrorCode::kSyntaxError, r.at("actuated", b.name), "expected true or false, found '" + actuated + "'");
      }
      j.actuated = actuated == "true";
      if (const Property* p = r.find("limits")) {
        PropertyReader::count(*p, 2);
        j.lower = to_double(p->values[0]);
        j.upper = to_double(p->values[1]);
      }
      j.home = r.number("home", 0.0);
      doc.joints.push_back(j);
      loc.joints.push_back(b.name.at);
    } else if (kind == "frame") {
      PropertyReader r(b.properties, {"link", "xyz", "rpy"});
      doc.frames.push_back({b.name.text, r.word("link", b.name), r.vec3("xyz", Vec3::Zero()), r.vec3("rpy", Vec3::Zero())});
      loc.frames.push_back(b.name.at);
    } else if (kind == "loop") {
      PropertyReader r(b.properties, {"a_link", "a_xyz", "a_rpy", "u_link", "u_xyz", "u_rpy", "mask", "constants"});
      LoopRecord l;
      l.name = b.name.text;
      l.a_link = r.word("a_link", b.name);
      l.a_xyz = r.vec3("a_xyz", l.a_xyz);
      l.a_rpy = r.vec3("a_rpy", l.a_rpy);
      l.u_link = r.word("u_link", b.name);
      l.u_xyz = r.vec3("u_xyz", l.u_xyz);
      l.u_rpy = r.vec3("u_rpy", l.u_rpy);
      const Property& mask = r.required("mask", b.name);
      int last = -1;
      for (const Token& tok : mask.values) {
        const auto it = std::find_if(kDirectionNames.begin(), kDirectionNames.end(), [&](const char* n) { return tok.text == n; });
        if (it == kDirectionNames.end()) fail(ErrorCode::kBadMask, tok.at, "unknown direction '" + tok.text + "'");
        const int k = static_cast<int>(it - kDirectionNames.begin());
        if (k <= last) fail(ErrorCode::kBadMask, tok.at, "directions must be distinct and in order x y z rx ry rz");
        l.mask[k] = true;
        last = k;
      }
      const auto rows = std::count(l.mask.begin(), l.mask.end(), true);
      if (const Property* p = r.find("constants")) {
        for (const Token& tok : p->values) l.constants.push_back(to_double(tok));
      } else {
        l.constants.assign(rows, 0.0);
      }
      doc.loops.push_back(l);
      loc.loops.push_back(b.name.at);
    } else if (kind == "contact") {
      PropertyReader r(b.properties, {"link", "point", "normal", "mu", "group"});
      doc.contacts.push_back({b.name.text, r.word("link", b.name), r.vec3("point", Vec3::Zero()),
                              r.vec3("normal", Vec3::UnitZ()), r.number("mu", 1.0),
                              r.word("group", b.name, std::string())});
      loc.contacts.push_back(b.name.at);
    } else if (kind == "actuator") {
      PropertyReader r(b.properties, {"lead", "efficiency"});
      doc.actuators.push_back({b.name.text, r.number("lead", 0.0), r.number("efficiency", 1.0)});
      loc.actuators.push_back(b.name.at);
    } else {
      fail(ErrorCode::kSyntaxError, b.keyword.at, "unknown block '" + kind + "'");
    }
  }
  for (const Token& tok : st.selections) {
    doc.selection.push_back(tok.text);
    loc.selection.push_back(tok.at);
  }
  validate(doc, loc);
  return doc;
}

std::string serialize_mechanism(const MechanismDocument& doc) {
  std::ostringstream out;
  out << "format: 1\n";
  if (!doc.name.empty()) out << "name: " << doc.name << "\n";
  out << "gravity: " << vec_text(doc.gravity) << "\n";
  for (const auto& l : doc.links) {
    const Mat3& i = l.inertia;
    out << "\nlink " << l.name << " {\n  mass: " << num(l.mass) << "\n  com: " << vec_text(l.com)
        << "\n  inertia: " << num(i(0, 0)) << " " << num(i(0, 1)) << " " << num(i(0, 2))
        << " " << num(i(1, 1)) << " " << num(i(1, 2)) << " " << num(i(2, 2)) << "\n}\n";
  }
  for (const auto& j : doc.joints) {
    out << "\njoint " << j.name << " {\n  type: " << joint_type_name(j.type) << "\n  parent: " << j.parent
        << "\n  child: " << j.child << "\n  xyz: " << vec_text(j.xyz) << "\n  rpy: " << vec_text(j.rpy)
        << "\n  axis: " << vec_text(j.axis) << "\n  actuated: " << (j.actuated ? "true" : "false")
        << "\n  limits: " << num(j.lower) << " " << num(j.upper);
    if (j.home != 0.0) out << "\n  home: " << num(j.home);
    out << "\n}\n";
  }
  for (const auto& f : doc.frames) {
    out << "\nframe " << f.name << " {\n  link: " << f.link << "\n  xyz: " << vec_text(f.xyz) << "\n  rpy: " << vec_text(f.rpy)
        << "\n}\n";
  }
  for (const auto& l : doc.loops) {
    out << "\nloop " << l.name << " {\n  a_link: " << l.a_link << "\n  a_xyz: " << vec_text(l.a_xyz)
        << "\n  a_rpy: " << vec_text(l.a_rpy) << "\n  u_link: " << l.u_link << "\n  u_xyz: " << vec_text(l.u_xyz)
        << "\n  u_rpy: " << vec_text(l.u_rpy) << "\n  mask:";
    for (int k = 0; k < 6; ++k) {
      if (l.mask[k]) out << " " << kDirectionNames[k];
    }
    if (!l.constants.empty()) {
      out << "\n  constants:";
      for (double c : l.constants) out << " " << num(c);
    }
    out << "\n}\n";
  }
  for (const auto& c : doc.contacts) {
    out << "\ncontact " << c.name << " {\n  link: " << c.link << "\n  point: " << vec_text(c.point)
        << "\n  normal: " << vec_text(c.normal) << "\n  mu: " << num(c.mu);
    if (!c.group.empty()) out << "\n  group: " << c.group;
    out << "\n}\n";
  }
  for (const auto& a : doc.actuators) {
    out << "\nactuator " << a.joint << " {\n  lead: " << num(a.lead) << "\n  efficiency: " << num(a.efficiency)
        << "\n}\n";
  }
  if (!doc.selection.empty()) {
    out << "\nselect";
    for (const auto& s : doc.selection) out << " " << s;
    out << "\n";
  }
  return out.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write '" + path + "'");
  out << text;
}

MechanismModel load_model(const std::string& path) {
  return MechanismModel::from_document(parse_mechanism(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// Logs

bool MeasurementLog::operator==(const MeasurementLog& o) const {
  if (actuators != o.actuators || has_torque != o.has_torque || has_acceleration != o.has_acceleration || samples.size() != o.samples.size()) return false;
  const auto same = [](const VecX& a, const VecX& b) {
    return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data());
  };
  for (size_t k = 0; k < samples.size(); ++k) {
    const auto& a = samples[k];
    const auto& b = o.samples[k];
    if (a.time != b.time || !same(a.measurement.actuated_position, b.measurement.actuated_position) ||
        !same(a.measurement.actuated_velocity, b.measurement.actuated_velocity) || !same(a.torque, b.torque) || !same(a.acceleration, b.acceleration)) {
      return false;
    }
  }
  return true;
}

MeasurementLog parse_log(std::string_view text) {
  bool saw_format = false;
  const auto lines = csv_lines(text, saw_format);
  if (lines.empty()) fail(ErrorCode::kColumnMismatch, {1, 1}, "missing header row");
  const CsvLine& header = lines.front();
  if (header.fields.empty() || header.fields[0] != "time_s") {
    fail(ErrorCode::kColumnMismatch, {header.line, 1}, "first column must be time_s");
  }
  // Column index per (kind, actuator).
  std::map<std::string, std::array<int, 4>> columns;
  MeasurementLog log;
  for (size_t k = 1; k < header.fields.size(); ++k) {
    const std::string& h = header.fields[k];
    const size_t us = h.find('_');
    const std::string kind = us == std::string::npos ? h : h.substr(0, us);
    const int slot = kind == "pos" ? 0 : kind == "vel" ? 1 : kind == "tau" ? 2 : kind == "acc" ? 3 : -1;
    if (slot < 0 || us + 1 >= h.size()) fail(ErrorCode::kColumnMismatch, {header.line, column_of(header, k)}, "unexpected column '" + h + "'");
    const std::string name = h.substr(us + 1);
    auto [it, fresh] = columns.try_emplace(name, std::array<int, 4>{-1, -1, -1, -1});
    if (fresh) log.actuators.push_back(name);
    if (it->second[slot] >= 0) fail(ErrorCode::kColumnMismatch, {header.line, column_of(header, k)}, "repeated column '" + h + "'");
    it->second[slot] = static_cast<int>(k);
  }
  int torque_columns = 0, acceleration_columns = 0;
  for (const auto& name : log.actuators) {
    const auto& c = columns[name];
    if (c[0] < 0 || c[1] < 0) fail(ErrorCode::kColumnMismatch, {header.line, 1}, "actuator '" + name + "' needs pos_ and vel_ columns");
    torque_columns += c[2] >= 0;
    acceleration_columns += c[3] >= 0;
  }
  const int actuators = static_cast<int>(log.actuators.size());
  if (torque_columns != 0 && torque_columns != actuators) {
    fail(ErrorCode::kColumnMismatch, {header.line, 1}, "tau_ columns must be given for every actuator or none");
  }
  if (acceleration_columns != 0 && acceleration_columns != actuators) {
    fail(ErrorCode::kColumnMismatch, {header.line, 1}, "acc_ columns must be given for every actuator or none");
  }
  log.has_torque = torque_columns > 0;
  log.has_acceleration = acceleration_columns > 0;

  const int n = static_cast<int>(log.actuators.size());
  for (size_t r = 1; r < lines.size(); ++r) {
    const CsvLine& line = lines[r];
    if (line.fields.size() != header.fields.size()) {
      fail(ErrorCode::kColumnMismatch, {line.line, 1},
           "row has " + std::to_string(line.fields.size()) + " fields, header has " + std::to_string(header.fields.size()));
    }
    LogSample s;
    s.time = csv_double(line, 0);
    if (!log.samples.empty() && !(s.time > log.samples.back().time)) {
      fail(ErrorCode::kNonMonotoneTime, {line.line, 1}, "time " + line.fields[0] + " does not increase");
    }
    s.measurement.actuated_position.resize(n);
    s.measurement.actuated_velocity.resize(n);
    if (log.has_torque) s.torque.resize(n);
    if (log.has_acceleration) s.acceleration.resize(n);
    for (int k = 0; k < n; ++k) {
      const auto& c = columns[log.actuators[k]];
      s.measurement.actuated_position[k] = csv_double(line, c[0]);
      s.measurement.actuated_velocity[k] = csv_double(line, c[1]);
      if (log.has_torque) s.torque[k] = csv_double(line, c[2]);
      if (log.has_acceleration) s.acceleration[k] = csv_double(line, c[3]);
    }
    log.samples.push_back(std::move(s));
  }
  return log;
}

std::string serialize_log(const MeasurementLog& log) {
  std::vector<std::string> header{"time_s"};
  for (const auto& a : log.actuators) {
    header.push_back("pos_" + a);
    header.push_back("vel_" + a);
    if (log.has_torque) header.push_back("tau_" + a);
    if (log.has_acceleration) header.push_back("acc_" + a);
  }
  std::string out = "# format: 1\n" + join_csv(header) + "\n";
  for (const auto& s : log.samples) {
    std::vector<std::string> cells{format_double(s.time)};
    for (size_t k = 0; k < log.actuators.size(); ++k) {
      cells.push_back(format_double(s.measurement.actuated_position[k]));
      cells.push_back(format_double(s.measurement.actuated_velocity[k]));
      if (log.has_torque) cells.push_back(format_double(s.torque[k]));
      if (log.has_acceleration) cells.push_back(format_double(s.acceleration[k]));
    }
    out += join_csv(cells) + "\n";
  }
  return out;
}

MeasurementLog bind_log(const MechanismModel& model, const MeasurementLog& log) {
  const int na = model.actuated_count();
  const int first = model.passive_count();
  if (static_cast<int>(log.actuators.size()) != na) {
    throw Error(ErrorCode::kColumnMismatch, "log has " + std::to_string(log.actuators.size()) + " actuators, model has " +
                                                std::to_string(na));
  }
  std::vector<int> source(na);
  MeasurementLog out = log;
  for (int k = 0; k < na; ++k) {
    const std::string& name = model.dof_name(first + k);
    const auto it = std::find(log.actuators.begin(), log.actuators.end(), name);
    if (it == log.actuators.end()) throw Error(ErrorCode::kColumnMismatch, "log has no columns for actuator '" + name + "'");
    source[k] = static_cast<int>(it - log.actuators.begin());
    out.actuators[k] = name;
  }
  for (size_t r = 0; r < log.samples.size(); ++r) {
    for (int k = 0; k < na; ++k) {
      out.samples[r].measurement.actuated_position[k] = log.samples[r].measurement.actuated_position[source[k]];
      out.samples[r].measurement.actuated_velocity[k] = log.samples[r].measurement.actuated_velocity[source[k]];
      if (log.has_torque) out.samples[r].torque[k] = log.samples[r].torque[source[k]];
      if (log.has_acceleration) out.samples[r].acceleration[k] = log.samples[r].acceleration[source[k]];
    }
  }
  return out;
}

std::vector<std::pair<int, double>> parse_absolute_measurements(const MechanismModel& model, std::string_view text) {
  bool saw_format = false;
  const auto lines = csv_lines(text, saw_format);
  if (lines.empty() || lines.front().fields != std::vector<std::string>{"joint", "value"}) {
    fail(ErrorCode::kColumnMismatch, {lines.empty() ? 1 : lines.front().line, 1}, "header must be joint,value");
  }
  std::vector<std::pair<int, double>> out;
  for (size_t r = 1; r < lines.size(); ++r) {
    const CsvLine& line = lines[r];
    if (line.fields.size() != 2) fail(ErrorCode::kColumnMismatch, {line.line, 1}, "expected joint,value");
    const auto dof = model.find_dof(line.fields[0]);
    if (!dof || *dof >= model.passive_count()) {
      fail(ErrorCode::kUnknownReference, {line.line, 1}, "'" + line.fields[0] + "' is not a passive joint");
    }
    out.emplace_back(*dof, csv_double(line, 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Result tables

void ResultTable::add_row(std::vector<double> row) {
  if (!label_column.empty()) throw Error(ErrorCode::kInvalidArgument, "labeled table needs a row label");
  if (row.size() != columns.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "row has " + std::to_string(row.size()) + " values, table has " +
                                                   std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

void ResultTable::add_row(std::string label, std::vector<double> row) {
  if (label_column.empty()) throw Error(ErrorCode::kInvalidArgument, "unlabeled table takes no row label");
  if (row.size() != columns.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "row has " + std::to_string(row.size()) + " values, table has " +
                                                   std::to_string(columns.size()) + " columns");
  }
  labels.push_back(std::move(label));
  rows.push_back(std::move(row));
}

double ResultTable::at(const std::string& label, const std::string& column) const {
  const auto r = std::find(labels.begin(), labels.end(), label);
  const auto c = std::find(columns.begin(), columns.end(), column);
  if (r == labels.end() || c == columns.end()) {
    throw Error(ErrorCode::kInvalidArgument, "no entry (" + label + ", " + column + ")");
  }
  return rows[r - labels.begin()][c - columns.begin()];
}

std::string emit_csv(const ResultTable& table) {
  const bool labeled = !table.label_column.empty();
  std::vector<std::string> header;
  if (labeled) header.push_back(table.label_column);
  header.insert(header.end(), table.columns.begin(), table.columns.end());
  std::string out = "# format: 1\n" + join_csv(header) + "\n";
  for (size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<std::string> cells;
    if (labeled) cells.push_back(table.labels[r]);
    for (double v : table.rows[r]) cells.push_back(format_double(v));
    out += join_csv(cells) + "\n";
  }
  return out;
}

ResultTable parse_csv_table(std::string_view text, bool labeled) {
  bool saw_format = false;
  const auto lines = csv_lines(text, saw_format);
  if (lines.empty()) fail(ErrorCode::kColumnMismatch, {1, 1}, "missing header row");
  ResultTable table;
  table.columns = lines.front().fields;
  if (labeled) {
    if (table.columns.empty()) fail(ErrorCode::kColumnMismatch, {lines.front().line, 1}, "missing label column");
    table.label_column = table.columns.front();
    table.columns.erase(table.columns.begin());
  }
  const size_t first = labeled ? 1 : 0;
  for (size_t r = 1; r < lines.size(); ++r) {
    const CsvLine& line = lines[r];
    if (line.fields.size() != table.columns.size() + first) fail(ErrorCode::kColumnMismatch, {line.line, 1}, "row width differs from header");
    std::vector<double> row;
    for (size_t k = first; k < line.fields.size(); ++k) row.push_back(csv_double(line, k));
    if (labeled) table.labels.push_back(line.fields[0]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string emit_json(const ResultTable& table) {
  nlohmann::ordered_json j;
  j["format"] = 1;
  if (!table.label_column.empty()) j["label_column"] = table.label_column;
  j["columns"] = table.columns;
  if (!table.label_column.empty()) j["labels"] = table.labels;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    auto cells = nlohmann::ordered_json::array();
    for (double v : row) cells.push_back(std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json());
    j["rows"].push_back(cells);
  }
  return j.dump(2) + "\n";
}

ResultTable parse_json_table(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kSyntaxError, e.what());
  }
  try {
    if (j.at("format").get<int>() != 1) throw Error(ErrorCode::kSyntaxError, "unsupported format");
    ResultTable table;
    table.columns = j.at("columns").get<std::vector<std::string>>();
    std::vector<std::string> labels;
    if (j.contains("label_column")) {
      table.label_column = j.at("label_column").get<std::string>();
      labels = j.at("labels").get<std::vector<std::string>>();
    }
    const auto& rows = j.at("rows");
    if (!table.label_column.empty() && labels.size() != rows.size()) throw Error(ErrorCode::kColumnMismatch, "label count differs from row count");
    for (size_t r = 0; r < rows.size(); ++r) {
      std::vector<double> values;
      for (const auto& v : rows[r]) values.push_back(v.is_null() ? std::nan("") : v.get<double>());
      if (table.label_column.empty()) {
        table.add_row(std::move(values));
      } else {
        table.add_row(labels[r], std::move(values));
      }
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSyntaxError, e.what());
  }
}

}  // namespace closedlink
