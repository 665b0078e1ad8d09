#include "actbench/costmodel.hpp"

#include "actbench/csv.hpp"

#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace actbench::costmodel {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c == '$';
  });
}

std::vector<std::string> split_operands(std::string_view s, std::size_t line) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (depth < 0) throw ParseError(line, "unbalanced ']'");
    if (depth == 0 && (c == ',' || std::isspace(static_cast<unsigned char>(c)))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur.push_back(c);
  }
  if (depth != 0) throw ParseError(line, "unbalanced '['");
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Instruction parse_instruction(std::string_view body, std::size_t line) {
  const auto end = body.find_first_of(" \t");
  Instruction ins;
  ins.mnemonic = lower(body.substr(0, end));
  if (!is_identifier(ins.mnemonic)) {
    throw ParseError(line, fmt::format("'{}' is not a mnemonic", ins.mnemonic));
  }
  if (end != std::string_view::npos) ins.operands = split_operands(body.substr(end), line);
  ins.cost_class = classify(ins.mnemonic);
  ins.line = line;
  return ins;
}

std::uint64_t cost_of(const std::string& mnemonic, const CostTable& table) {
  const auto it = table.find(mnemonic);
  if (it == table.end()) throw MissingCost(fmt::format("no cost entry for mnemonic '{}'", mnemonic));
  return it->second;
}

template <typename PerInstruction>
std::uint64_t walk(const Listing& listing, const SymbolMap& symbols, std::vector<std::string>& stack,
                   const PerInstruction& own_cost) {
  if (std::find(stack.begin(), stack.end(), listing.label) != stack.end()) {
    std::string chain;
    for (const auto& s : stack) chain += s + " -> ";
    throw CycleDetected("call cycle: " + chain + listing.label);
  }
  stack.push_back(listing.label);
  std::uint64_t total = 0;
  for (const auto& ins : listing.instructions) {
    total += own_cost(ins);
    if (ins.mnemonic != "call") continue;
    if (ins.operands.empty()) {
      throw MissingSymbol(fmt::format("{}: call without a target on line {}", listing.label, ins.line));
    }
    const auto callee = symbols.find(ins.operands.front());
    if (callee == symbols.end()) {
      throw MissingSymbol(fmt::format("{}: call to unknown symbol '{}'", listing.label, ins.operands.front()));
    }
    total += walk(callee->second, symbols, stack, own_cost);
  }
  stack.pop_back();
  return total;
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& message, const std::string& source)
    : std::runtime_error(source.empty() ? fmt::format("line {}: {}", line, message)
                                        : fmt::format("{}: line {}: {}", source, line, message)),
      line_(line),
      message_(message) {}

Listing Listing::concatenated(const Listing& tail) const {
  Listing out = *this;
  out.instructions.insert(out.instructions.end(), tail.instructions.begin(), tail.instructions.end());
  return out;
}

CostClass classify(std::string_view mnemonic) noexcept {
  static constexpr std::string_view simple[] = {"xor", "and", "pop", "imul", "fld",
                                              "fchs", "fsubr", "fadd", "fdiv"};
  static constexpr std::string_view red[] = {"fscale", "fprem", "f2xm1"};
  if (std::find(std::begin(simple), std::end(simple), mnemonic) != std::end(simple)) return CostClass::OneMicroOp;
  if (std::find(std::begin(red), std::end(red), mnemonic) != std::end(red)) return CostClass::Heavy;
  return CostClass::TableLookup;
}

std::vector<Listing> parse_listings(std::string_view text) {
  std::vector<Listing> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (const auto semi = line.find(';'); semi != std::string_view::npos) line = line.substr(0, semi);
    line = trim(line);
    if (line.empty()) continue;

    const auto colon = line.find(':');
    const auto first_space = line.find_first_of(" \t");
    if (colon != std::string_view::npos && (first_space == std::string_view::npos || colon < first_space)) {
      const std::string label(trim(line.substr(0, colon)));
      if (!is_identifier(label)) throw ParseError(line_no, fmt::format("bad label '{}'", label));
      for (const auto& l : out) {
        if (l.label == label) throw ParseError(line_no, fmt::format("label '{}' defined twice", label));
      }
      const std::string_view body = trim(line.substr(colon + 1));
      if (body.empty()) throw ParseError(line_no, fmt::format("label '{}' has no mnemonic", label));
      out.push_back({label, {}});
      out.back().instructions.push_back(parse_instruction(body, line_no));
      continue;
    }
    if (out.empty()) throw ParseError(line_no, "instruction before any label");
    out.back().instructions.push_back(parse_instruction(line, line_no));
  }
  return out;
}

Listing parse_listing(std::string_view text) {
  auto all = parse_listings(text);
  if (all.size() != 1) {
    throw ParseError(0, fmt::format("expected one labelled listing, found {}", all.size()));
  }
  return std::move(all.front());
}

std::vector<Listing> load_listing_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open listing " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return parse_listings(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.message(), path.string());
  }
}

const CostTable& default_cost_table() {
  static const CostTable table = [] {
    CostTable t;
    for (const char* m : {"xor", "and", "pop", "imul", "fld", "fchs", "fsubr", "fadd", "fdiv"}) t[m] = 1;
    for (const char* m : {"fscale", "fprem", "f2xm1"}) t[m] = 15;
    t["push"] = 1;
    t["rol"] = 2;
    t["ret"] = 1;
    t["fst"] = 1;
    t["fxch"] = 1;
    t["fld1"] = 2;
    t["fldl2e"] = 2;
    t["fmulp"] = 1;
    t["faddp"] = 1;
    t["call"] = 2;
    return t;
  }();
  return table;
}

CostTable read_cost_table(std::istream& is, const CostTable& base) {
  const csv::Table t = csv::read(is);
  const std::size_t c_m = t.column("mnemonic");
  const std::size_t c_n = t.column("count");
  CostTable out = base;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const long long n = csv::parse_integer(row[c_n], "count", t.line_numbers[i]);
    if (n < 1) {
      throw csv::SchemaError(fmt::format("line {}: column 'count': {} is not positive", t.line_numbers[i], n));
    }
    const std::string m = lower(trim(row[c_m]));
    if (!is_identifier(m)) {
      throw csv::SchemaError(fmt::format("line {}: column 'mnemonic': '{}' is not a mnemonic", t.line_numbers[i], m));
    }
    out[m] = static_cast<std::uint64_t>(n);
  }
  return out;
}

std::uint64_t micro_op_total(const Listing& listing, const CostTable& table, const SymbolMap& follow_calls) {
  std::vector<std::string> stack;
  return walk(listing, follow_calls, stack, [&](const Instruction& ins) { return cost_of(ins.mnemonic, table); });
}

std::uint64_t inlined_instruction_count(const Listing& listing, const SymbolMap& follow_calls) {
  std::vector<std::string> stack;
  return walk(listing, follow_calls, stack, [](const Instruction&) { return std::uint64_t{1}; });
}

SymbolMap symbol_map(const std::vector<Listing>& listings) {
  SymbolMap out;
  for (const auto& l : listings) out.emplace(l.label, l);
  return out;
}

}  // namespace actbench::costmodel
