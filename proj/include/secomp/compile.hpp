#pragma once

#include "secomp/lang.hpp"
#include "secomp/target.hpp"

namespace secomp {

// Two-pass lowering: expressions flatten through t0/t1 with frame-resident
// temporaries, then the calling convention places the first 8 arguments in
// a0..a7 and spills the surplus into the caller frame's spill area. No
// cross-compartment inlining or tail calls are ever generated; all values
// live in the frame across calls (every register is caller-saved).
TargetProgram compile_program(const Program& p);
TargetCompartment compile_compartment(const CompartmentDecl& c);

// Frame layout constants shared with the machine: slot 0 holds the caller's
// sp, slot 1 the return address, and the spill area starts at slot 2.
constexpr int kFrameSavedSp = 0;
constexpr int kFrameSavedRa = 1;
constexpr int kFrameSpillBase = 2;

}  // namespace secomp
