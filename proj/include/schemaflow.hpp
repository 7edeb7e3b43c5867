#pragma once

#include "schemaflow/error.hpp"
#include "schemaflow/text.hpp"
#include "schemaflow/json_util.hpp"
#include "schemaflow/document.hpp"
#include "schemaflow/chunking.hpp"
#include "schemaflow/units.hpp"
#include "schemaflow/schema.hpp"
#include "schemaflow/embedding.hpp"
#include "schemaflow/store.hpp"
#include "schemaflow/gateway.hpp"
#include "schemaflow/schema_generation.hpp"
#include "schemaflow/records.hpp"
#include "schemaflow/rev.hpp"
#include "schemaflow/aggregate.hpp"
#include "schemaflow/assignment.hpp"
#include "schemaflow/eval.hpp"
