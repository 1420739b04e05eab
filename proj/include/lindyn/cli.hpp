#ifndef LINDYN_CLI_HPP
#define LINDYN_CLI_HPP

#include "lindyn/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace lindyn::cli {

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Thrown by parse for --help; carries the text to print.
struct HelpRequested {
  std::string text;
};

struct Command {
  std::string verb;
  std::string out_dir = ".";
  std::vector<std::pair<std::string, std::string>> flags;  ///< every flag of the verb, declaration order

  std::uint64_t seed() const;
  const std::string& get(const std::string& name) const;
  void set(const std::string& name, const std::string& value);
  bool is(const std::string& name, const std::string& value) const { return get(name) == value; }
  double real(const std::string& name) const;
  long integer(const std::string& name) const;
  std::vector<double> reals(const std::string& name) const;

  /// "lindyn <verb> --flag value ..." with every non-empty flag except --out.
  std::string header() const;
};

const std::vector<std::string>& verbs();
std::string verb_table();

Command parse(const std::vector<std::string>& args);

/// Runs a parsed command, writing artifacts under out_dir. Returns 0, or 1 on numerical failure.
int execute(const Command& cmd, std::ostream& out, std::ostream& err);

/// parse + execute with exit codes 0 / 1 / 2.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Splits a recorded command line; double quotes group, backslash escapes inside quotes.
std::vector<std::string> split_command_line(const std::string& line);

/// The command line recorded at the top of a CSV, JSON or SVG artifact.
std::string read_header(const std::string& path);

}  // namespace lindyn::cli

#endif  // LINDYN_CLI_HPP
