#include "levyheat/report.hpp"

#include <ostream>

#include "json.hpp"

namespace levyheat {

void VerificationReport::note(const std::string& check, const std::string& where, double lhs,
                              double rhs) {
    CheckRecord rec{check, where, lhs, rhs, 0.0};
    rec.ratio = (rhs != 0.0) ? lhs / rhs : (lhs == 0.0 ? 0.0 : 1e300);
    if (rec.ratio > worst_ratio) {
        worst_ratio = rec.ratio;
        worst_location = where;
    }
    records.push_back(std::move(rec));
}

void VerificationReport::write_jsonl(std::ostream& os) const {
    for (const auto& r : records) {
        nlohmann::json j{{"check", r.check},
                         {"grid_point", r.grid_point},
                         {"lhs", r.lhs},
                         {"rhs", r.rhs},
                         {"ratio", r.ratio}};
        os << j.dump() << "\n";
    }
    nlohmann::json s{{"check", name},
                     {"summary", true},
                     {"pass", pass},
                     {"fitted_constant", fitted_constant},
                     {"tolerance", tolerance},
                     {"worst_ratio", worst_ratio},
                     {"worst_location", worst_location}};
    os << s.dump() << "\n";
}

}  // namespace levyheat
