#pragma once

namespace qsd {

inline constexpr const char* kVersion = "0.1.0";

// Schema tags written into every output file header. Bump the suffix when a
// format changes incompatibly.
inline constexpr const char* kSchemaConstellation = "qsd.constellation/1";
inline constexpr const char* kSchemaSolveReport = "qsd.solve-report/1";
inline constexpr const char* kSchemaMinimaxReport = "qsd.minimax-report/1";
inline constexpr const char* kSchemaSessionReport = "qsd.session-report/1";
inline constexpr const char* kSchemaTranscript = "qsd.transcript/1";
inline constexpr const char* kSchemaEtaReport = "qsd.eta-report/1";
inline constexpr const char* kSchemaEtaSurface = "qsd.eta-surface/1";
inline constexpr const char* kSchemaAttackReport = "qsd.attack-report/1";
inline constexpr const char* kSchemaKeyPosterior = "qsd.key-posterior/1";

}  // namespace qsd
