#pragma once

#include "dtwin/collision.hpp"
#include "dtwin/kinematics.hpp"

#include <string>
#include <vector>

namespace dtwin {

enum class SignalKind { digital, analog };
enum class Protocol { modbus, opcua, ros, mqtt };
enum class ZoneRole { pick, place, neutral };

const char* to_string(SignalKind k);
const char* to_string(Protocol p);
const char* to_string(ZoneRole r);
const char* to_string(JointKind k);

/// Declared I/O point. Carried as metadata; nothing is ever actuated.
struct SignalInfo {
    std::string owner;       ///< machine id
    std::string controller;  ///< empty when attached directly to the machine
    std::string name;
    SignalKind kind;
    double rate_hz;
    Protocol protocol;
};

/// Validated, unit-converted form of a scene document.
struct SceneModel {
    std::string robot_id;
    RobotModel robot;
    std::vector<std::string> link_ids;
    std::vector<CollisionObject> obstacles;  ///< machines
    std::vector<CollisionObject> zones;      ///< metadata "role" is pick|place|neutral
    std::vector<SignalInfo> signals;
    double collision_margin = kDefaultCollisionMargin;
};

}  // namespace dtwin
