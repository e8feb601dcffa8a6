#pragma once

#include "msynth/linkage.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace msynth::dsl {

enum class ErrorKind {
    NoStatements,
    Lexical,
    Syntax,
    UnknownJointKind,
    Arity,
    Keyword,
    ForwardReference,
    DuplicateName,
    Validation,
};

std::string_view to_string(ErrorKind kind);

struct Diagnostic {
    int line = 0;    // 1-based; 0 for document-level errors
    int column = 0;  // 1-based
    ErrorKind kind = ErrorKind::Syntax;
    std::string message;
};

struct SourceSpan {
    int line = 0;
    int column = 0;
};

struct Statement {
    Joint joint;
    SourceSpan span;
};

/// One joint declaration per line, in source order.
struct DslDocument {
    std::vector<Statement> statements;
};

struct ParseResult {
    DslDocument document;
    std::optional<MechanismSpec> spec;  // set only when `errors` is empty
    std::vector<Diagnostic> errors;

    bool ok() const { return errors.empty() && spec.has_value(); }
    /// "line 3: forward reference ..." joined with newlines.
    std::string error_text() const;
};

/// Parses a mechanism description. Never throws on malformed input; every
/// problem found in the document is reported, and linkage validation errors
/// are merged in when the text is otherwise well formed.
ParseResult parse(std::string_view text);

/// Content of the last fenced code block, else the longest run of lines that
/// each parse as a declaration; nullopt when neither exists.
std::optional<std::string> extract_block(std::string_view agent_text);

/// Deterministic, idempotent rendering: one statement per line, keyword
/// arguments in fixed order, shortest round-trip reals.
std::string format_canonical(const MechanismSpec& spec);

/// Grammar reference handed to the designer as its command documentation.
const std::string& api_documentation();

}  // namespace msynth::dsl
