// Console entry point: connect to the hub, wire the panes, poll /snapshot
// as a fallback at 2 Hz.

import { HubClient } from "./client.js";
import {
  drawWorld,
  renderFeed,
  renderMissionPane,
  renderProposalPane,
  renderRequestPane,
} from "./render.js";
import type { Snapshot } from "./state.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? window.location.hostname ?? "127.0.0.1";
const port = params.get("port") ?? "8766";
const base = `${host}:${port}`;

const canvas = document.getElementById("world") as HTMLCanvasElement | null;
if (!canvas) throw new Error("missing #world canvas");
const missionPane = document.getElementById("missions")!;
const proposalPane = document.getElementById("proposals")!;
const requestPane = document.getElementById("requests")!;
const feedPane = document.getElementById("feed")!;
const statusBadge = document.getElementById("status")!;

const client = new HubClient(new WebSocket(`ws://${base}/ws`));

client.onChange((state) => {
  statusBadge.textContent = `${state.connection} · tick ${state.tick}`;
  statusBadge.className = `status ${state.connection}`;
  drawWorld(canvas, state);
  renderMissionPane(missionPane, state);
  renderProposalPane(
    proposalPane, state,
    (id) => {
      const prop = client.state.proposals[id];
      if (prop) client.approveProposal(prop);
    },
    (id) => {
      const prop = client.state.proposals[id];
      if (prop) client.dismissProposal(prop);
    },
  );
  renderRequestPane(requestPane, state,
    (id, verdict) => client.submitVerdict(id, verdict));
  renderFeed(feedPane, state);

  for (const type of ["M1", "M2"]) {
    const btn = document.getElementById(`trigger-${type.toLowerCase()}`) as
      HTMLButtonElement | null;
    if (btn) btn.disabled = !client.canTrigger(type);
  }
  const aerial = client.aerialAgents()[0];
  for (const id of ["drone-follow", "drone-hold"]) {
    const btn = document.getElementById(id) as HTMLButtonElement | null;
    if (btn) btn.disabled = !aerial;
  }
});

document.getElementById("trigger-m1")?.addEventListener("click", () => {
  client.triggerMission("M1");
});
document.getElementById("trigger-m2")?.addEventListener("click", () => {
  client.triggerMission("M2", {
    waypoints: [[3, 0], [3, 3], [0, 3]],
  });
});
document.getElementById("drone-follow")?.addEventListener("click", () => {
  const aerial = client.aerialAgents()[0];
  const executor = Object.values(client.state.missions)
    .find((m) => !["Completed", "Unverified", "Aborted"].includes(m.state))
    ?.executor;
  if (aerial && executor) client.steerDrone(aerial, executor);
});
document.getElementById("drone-hold")?.addEventListener("click", () => {
  const aerial = client.aerialAgents()[0];
  if (aerial) client.steerDrone(aerial, null);
});

client.startSnapshotPolling(async () => {
  const res = await fetch(`http://${base}/snapshot`);
  if (!res.ok) throw new Error(`snapshot ${res.status}`);
  return (await res.json()) as Snapshot;
});

setInterval(() => client.heartbeat(), 2000);
window.addEventListener("beforeunload", () => client.bye());
