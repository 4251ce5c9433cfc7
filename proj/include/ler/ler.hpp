#pragma once

// Simulation core without networking. Include ler/server.hpp for the
// live service and ler/cli.hpp for the command-line front end.

#include "ler/command.hpp"
#include "ler/config.hpp"
#include "ler/controller.hpp"
#include "ler/default_grammar.hpp"
#include "ler/kinematics.hpp"
#include "ler/result.hpp"
#include "ler/scene.hpp"
#include "ler/session.hpp"
#include "ler/units.hpp"
