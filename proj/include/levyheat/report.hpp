#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace levyheat {

/// One sampled inequality check: lhs <= rhs expected, ratio = lhs/rhs.
struct CheckRecord {
    std::string check;
    std::string grid_point;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

struct VerificationReport {
    std::string name;
    bool pass = true;
    double fitted_constant = 0.0;   // smallest c making all sampled inequalities hold
    double tolerance = 0.0;         // budget the fit was compared against (if any)
    double worst_ratio = 0.0;
    std::string worst_location;
    std::vector<CheckRecord> records;

    void note(const std::string& check, const std::string& where, double lhs, double rhs);
    /// JSON-lines: one record object per line, then a summary line.
    void write_jsonl(std::ostream& os) const;
};

}  // namespace levyheat
