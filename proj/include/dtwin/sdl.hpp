#pragma once

// Scene Description Language: a block-structured text format describing the
// robot, the surrounding machines and the task zones of a cell.
//
//   scene version 1 {
//     machine press_1 {
//       pose xyz 0.5 0 0.3 rpy 0 0 0
//       shape box 0.4 0.4 0.6
//       mesh "press.dae"
//       controller plc_1 { signal door digital rate 10 protocol modbus }
//     }
//     robot arm {
//       pose xyz 0 0 0 rpy 0 0 0
//       joint j1 revolute axis 0 0 1 origin xyz 0 0 0.3 rpy 0 0 0
//             limits -170 170 vel 1.0 acc 2.0 link_shape cylinder 0.05 0.3
//     }
//     zone drop role place { pose xyz 0 0.5 0.65 rpy 0 0 0 shape box 0.2 0.2 0.1 }
//   }
//
// Angles (rpy, revolute limits) are degrees; everything else is SI. Box and
// cylinder dimensions are full sizes, not half extents.

#include "dtwin/scene_model.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dtwin::sdl {

/// Where a declaration started. Ignored by structural equality.
struct SourceLoc {
    int line = 1;
    int column = 1;
    friend bool operator==(const SourceLoc&, const SourceLoc&) { return true; }
};

using Triple = std::array<double, 3>;

struct PoseDecl {
    Triple xyz{0, 0, 0};
    Triple rpy_deg{0, 0, 0};
    friend bool operator==(const PoseDecl&, const PoseDecl&) = default;
};

struct BoxDecl {
    Triple size;
    friend bool operator==(const BoxDecl&, const BoxDecl&) = default;
};
struct SphereDecl {
    double radius;
    friend bool operator==(const SphereDecl&, const SphereDecl&) = default;
};
struct CylinderDecl {
    double radius;
    double height;
    friend bool operator==(const CylinderDecl&, const CylinderDecl&) = default;
};
using ShapeDecl = std::variant<BoxDecl, SphereDecl, CylinderDecl>;

struct SignalDecl {
    std::string name;
    SignalKind kind = SignalKind::digital;
    double rate_hz = 1.0;
    Protocol protocol = Protocol::modbus;
    SourceLoc loc;
    friend bool operator==(const SignalDecl&, const SignalDecl&) = default;
};

struct ControllerDecl {
    std::string id;
    std::vector<SignalDecl> signals;
    SourceLoc loc;
    friend bool operator==(const ControllerDecl&, const ControllerDecl&) = default;
};

struct MachineDecl {
    std::string id;
    PoseDecl pose;
    ShapeDecl shape;
    std::optional<std::string> mesh_ref;
    std::optional<ControllerDecl> controller;
    std::vector<SignalDecl> signals;
    SourceLoc loc;
    friend bool operator==(const MachineDecl&, const MachineDecl&) = default;
};

struct JointDecl {
    std::string id;
    JointKind kind = JointKind::revolute;
    Triple axis{0, 0, 1};
    PoseDecl origin;
    double lower = 0;  ///< degrees (revolute) or meters (prismatic)
    double upper = 0;
    double vel = 1;
    double acc = 1;
    SourceLoc loc;
    friend bool operator==(const JointDecl&, const JointDecl&) = default;
};

struct LinkDecl {
    ShapeDecl shape;
    friend bool operator==(const LinkDecl&, const LinkDecl&) = default;
};

struct RobotDecl {
    std::string id;
    PoseDecl base_pose;
    std::vector<JointDecl> joints;
    std::vector<LinkDecl> links;  ///< links[i] is carried by joints[i]
    SourceLoc loc;
    friend bool operator==(const RobotDecl&, const RobotDecl&) = default;
};

struct ZoneDecl {
    std::string id;
    ZoneRole role = ZoneRole::neutral;
    PoseDecl pose;
    ShapeDecl shape;
    SourceLoc loc;
    friend bool operator==(const ZoneDecl&, const ZoneDecl&) = default;
};

using Declaration = std::variant<MachineDecl, RobotDecl, ZoneDecl>;

struct SdlDocument {
    long version = 1;
    std::vector<Declaration> declarations;
    SourceLoc loc;
    friend bool operator==(const SdlDocument&, const SdlDocument&) = default;
};

enum class Severity { error, warning };

struct Diagnostic {
    Severity severity = Severity::error;
    int line = 1;
    int column = 1;
    std::string message;
};

std::string to_string(const Diagnostic& d);

struct ParseResult {
    std::optional<SdlDocument> document;  ///< present iff there is no error diagnostic
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return document.has_value(); }
};

struct ValidateOptions {
    double workspace_radius = 5.0;  ///< machines entirely beyond this distance get a warning
};

/// Syntax pass followed by validate(). Never throws.
ParseResult parse(std::string_view source, const ValidateOptions& opts = {});

std::vector<Diagnostic> validate(const SdlDocument& doc, const ValidateOptions& opts = {});

bool has_errors(const std::vector<Diagnostic>& diags);

/// Canonical text; numbers are printed in shortest round-trip form.
std::string serialize(const SdlDocument& doc);

class InvalidDocument : public std::runtime_error {
public:
    explicit InvalidDocument(std::vector<Diagnostic> d);
    std::vector<Diagnostic> diagnostics;
};

/// Throws InvalidDocument when validate() reports errors.
SceneModel to_scene_model(const SdlDocument& doc);

Shape to_shape(const ShapeDecl& s);
Pose to_pose(const PoseDecl& p);

}  // namespace dtwin::sdl
