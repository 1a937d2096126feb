#ifndef CPCSTAR_IO_HPP
#define CPCSTAR_IO_HPP

#include <iosfwd>
#include <variant>

#include "cpcstar/constructions.hpp"

namespace cpcstar {

/// Parsed content of a description file: either an inductive system or a
/// c.p.c. approximation system.
using ParsedDocument = std::variant<InductiveSystem, CpapSystem>;

/// Parses and fully validates a description document.  Parse errors carry
/// the offending field path; validation failures report the offending step
/// and Choi minimum eigenvalue.
ParsedDocument parse_system_document(const std::string& text,
                                     const Tolerances& tol = {});

/// Serializes a system or CPAP back to the document format.  Kraus-built
/// maps stay in kraus form, dense maps in matrix form, so emit/parse round
/// trips are structurally exact.
std::string emit_system_document(const InductiveSystem& sys);
std::string emit_system_document(const CpapSystem& cpap);

/// Builtin registry: "uhf{2,3}", "interval{[3,5,9]}",
/// "weighted{4,[0.5]}", "nf_lift{uhf{2,3}}", "interval_cpap{[3,5,9]}",
/// "exact_cpap{[2],4}".  Returns the corresponding description document.
std::string emit_builtin_example(const std::string& descriptor);

/// Instantiates a builtin descriptor directly.
ParsedDocument build_builtin(const std::string& descriptor);

bool structurally_equal(const InductiveSystem& a, const InductiveSystem& b);
bool structurally_equal(const CpapSystem& a, const CpapSystem& b);

/// CSV with metadata comment lines, a fixed header kind,k,m,n,l,pair,value
/// and one row per entry, values printed with 17 significant digits.
/// Byte-identical for identical reports.
std::string emit_csv(const DefectReport& report);

/// Element literals (blocks of row-major [re, im] entries), shared with the
/// document format.
std::string emit_element_literal(const Element& e);
Element parse_element_literal(const std::string& text,
                              const AlgebraShape& shape);

}  // namespace cpcstar

#endif
