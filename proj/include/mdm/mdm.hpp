#ifndef MDM_MDM_HPP
#define MDM_MDM_HPP

#include "mdm/types.hpp"
#include "mdm/random.hpp"
#include "mdm/kernel.hpp"
#include "mdm/model.hpp"
#include "mdm/generative.hpp"
#include "mdm/inference.hpp"
#include "mdm/evaluation.hpp"
#include "mdm/io.hpp"
#include "mdm/config.hpp"
#include "mdm/commands.hpp"

#endif  // MDM_MDM_HPP
