#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace actbench::costmodel {

enum class CostClass { OneMicroOp, Heavy, TableLookup };

struct Instruction {
  std::string mnemonic;  // lowercase
  std::vector<std::string> operands;
  CostClass cost_class = CostClass::TableLookup;
  std::size_t line = 0;
};

struct Listing {
  std::string label;
  std::vector<Instruction> instructions;

  Listing concatenated(const Listing& tail) const;
};

using CostTable = std::map<std::string, std::uint64_t, std::less<>>;
using SymbolMap = std::map<std::string, Listing, std::less<>>;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message, const std::string& source = {});
  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

class MissingSymbol : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CycleDetected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingCost : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simple integer and x87 arithmetic is one micro-op, fscale/fprem/f2xm1 are
/// heavy; everything else is looked up in the table.
CostClass classify(std::string_view mnemonic) noexcept;

/// Lines look like `label: mnemonic operands...` or, continuing the current
/// label, `mnemonic operands...`. Text after ';' is ignored. Operands split on
/// commas and whitespace, with bracketed memory operands kept whole.
std::vector<Listing> parse_listings(std::string_view text);
/// Exactly one label expected.
Listing parse_listing(std::string_view text);
std::vector<Listing> load_listing_file(const std::filesystem::path& path);

/// One-micro-op class = 1, heavy = 15, and small values for the rest.
const CostTable& default_cost_table();
/// `mnemonic,count` CSV with positive integer counts. Entries overlay `base`.
CostTable read_cost_table(std::istream& is, const CostTable& base = default_cost_table());

/// Sum of per-instruction costs. A `call` costs its own entry plus the
/// callee's total at every call site.
std::uint64_t micro_op_total(const Listing& listing, const CostTable& table,
                             const SymbolMap& follow_calls = {});

/// Instruction count with callees inlined at each call site.
std::uint64_t inlined_instruction_count(const Listing& listing, const SymbolMap& follow_calls = {});

SymbolMap symbol_map(const std::vector<Listing>& listings);

}  // namespace actbench::costmodel
