import assert from "node:assert/strict";
import { test } from "node:test";

import { parseCsv } from "../src/csv";
import {
  renderJumpDynamics,
  renderOrderParameters,
  renderPhaseDiagram,
  renderSingleBody,
  renderTrajectoryRaster,
} from "../src/panels";

const TRAJECTORY = parseCsv(
  `# schema: qcollide.trajectory.v1
t,site,outcome,occupation
1,0,1,0.9
1,1,0,0.1
2,0,0,0.5
2,1,1,0.7
`,
  "qcollide.trajectory.v1"
);

const ACTIVITY = parseCsv(
  `# schema: qcollide.activity.v1
t,activity
1,0.65
2,0.60
3,0.55
`,
  "qcollide.activity.v1"
);

const CORRELATIONS = parseCsv(
  `# schema: qcollide.correlations.v1
t,di,dt,c
2,0,1,-0.1
3,0,1,-0.05
`,
  "qcollide.correlations.v1"
);

const STATIONARY = parseCsv(
  `# schema: qcollide.stationary.v1
label,value
activity,0.47
activity_pxp,0.68
c_0_1,0.11
c_0_1_pxp,-0.04
`,
  "qcollide.stationary.v1"
);

const ESTIMATORS = parseCsv(
  `# schema: qcollide.estimators.v1
t,trajectory,di,dt,estimate
1,0,0,0,0.6
2,0,0,0,0.58
2,0,0,1,-0.08
3,0,0,1,-0.06
`,
  "qcollide.estimators.v1"
);

const PHASE = parseCsv(
  `# schema: qcollide.phase_diagram.v1
V,s,activity,c_0_1,lambda,iterations,converged
1.0,-0.2,0.59,-0.05,1.2,10,true
1.0,0.0,0.53,-0.06,1.0,1,true
5.875,-0.2,0.7,-0.04,1.3,12,true
5.875,0.0,0.47,0.11,1.0,1,false
`,
  "qcollide.phase_diagram.v1"
);

test("trajectory raster renders both panels with strokes", () => {
  const svg = renderTrajectoryRaster(TRAJECTORY);
  assert.ok(svg.startsWith("<svg"));
  assert.ok(svg.includes("site occupation"));
  assert.ok(svg.includes("measurement record"));
  const strokes = svg.match(/rgb\(200,30,30\)/g) ?? [];
  assert.ok(strokes.length >= 2, "two '1' outcomes drawn");
});

test("trajectory raster works without occupations", () => {
  const bare = parseCsv(
    "# schema: qcollide.trajectory.v1\nt,site,outcome\n1,0,1\n1,1,0\n",
    "qcollide.trajectory.v1"
  );
  const svg = renderTrajectoryRaster(bare);
  assert.ok(!svg.includes("site occupation"));
});

test("order parameters panel includes stationary levels and estimators", () => {
  const svg = renderOrderParameters(ACTIVITY, CORRELATIONS, STATIONARY, ESTIMATORS);
  assert.ok(svg.includes("activity"));
  assert.ok(svg.includes("c_0_1"));
  assert.ok(svg.includes("stroke-dasharray"), "stationary level lines present");
  assert.ok(svg.includes("rgb(150,150,150)"), "estimator gray lines present");
});

test("rendering is deterministic", () => {
  const a = renderOrderParameters(ACTIVITY, CORRELATIONS, STATIONARY, ESTIMATORS);
  const b = renderOrderParameters(ACTIVITY, CORRELATIONS, STATIONARY, ESTIMATORS);
  assert.equal(a, b);
  assert.equal(renderPhaseDiagram(PHASE), renderPhaseDiagram(PHASE));
});

test("phase diagram marks unconverged cells and draws cuts", () => {
  const svg = renderPhaseDiagram(PHASE);
  assert.ok(svg.includes("rgb(180,180,180)"), "unconverged cell painted gray");
  assert.ok(svg.includes("cut at s = 0"));
  assert.ok(svg.includes("cut at V = 5.875"));
});

test("jump dynamics renders events and scan", () => {
  const events = parseCsv(
    "# schema: qcollide.jump_events.v1\ntime,site,trajectory\n0.5,0,0\n1.25,1,0\n",
    "qcollide.jump_events.v1"
  );
  const scan = parseCsv(
    "# schema: qcollide.scgf_scan.v1\ns,theta,activity\n-0.1,0.3,2.1\n0.0,0.0,1.5\n0.1,-0.05,0.8\n",
    "qcollide.scgf_scan.v1"
  );
  const svg = renderJumpDynamics(events, undefined, scan);
  assert.ok(svg.includes("emission events"));
  assert.ok(svg.includes("stationary activity vs s"));
});

test("single-body heatmaps render all four panels", () => {
  const map = parseCsv(
    "# schema: qcollide.singlebody_map.v1\ndt,gamma,activity,c_0_1\n0.5,1.0,0.2,-0.01\n0.5,2.0,0.3,-0.02\n1.0,1.0,0.4,0.01\n1.0,2.0,0.5,0.02\n",
    "qcollide.singlebody_map.v1"
  );
  const det = parseCsv(
    "# schema: qcollide.detuning_scan.v1\ndelta,s,activity,c_0_1,lambda,iterations,converged\n0.0,0.0,0.54,-0.2,1.0,1,true\n1.0,0.0,0.55,-0.17,1.0,1,true\n",
    "qcollide.detuning_scan.v1"
  );
  const svg = renderSingleBody(map, det);
  assert.ok(svg.includes("stationary activity"));
  assert.ok(svg.includes("detuning vs s"));
});

test("empty tables are refused", () => {
  const empty = parseCsv("# schema: qcollide.activity.v1\nt,activity\n", "qcollide.activity.v1");
  assert.throws(() => renderOrderParameters(empty, CORRELATIONS, STATIONARY));
});
