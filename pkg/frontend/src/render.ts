// Top-down 2D world view plus the four console panes, rendered straight
// into the DOM — no framework, the state is small.

import { ConsoleState, requestExpired, ticksRemaining } from "./state.js";

const KIND_COLORS: Record<string, string> = {
  quadruped: "#f2b134",
  wheeled: "#4a90d9",
  aerial: "#7ed07e",
  fixed_camera: "#b98ae0",
};

export function drawWorld(canvas: HTMLCanvasElement, state: ConsoleState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = "#11151c";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const snap = state.snapshot;
  if (!snap) return;

  const b = snap.world.bounds;
  const pad = 20;
  const sx = (canvas.width - 2 * pad) / (b.xmax - b.xmin);
  const sy = (canvas.height - 2 * pad) / (b.ymax - b.ymin);
  const s = Math.min(sx, sy);
  const px = (x: number) => pad + (x - b.xmin) * s;
  // world y up, canvas y down
  const py = (y: number) => canvas.height - pad - (y - b.ymin) * s;

  ctx.strokeStyle = "#3a4150";
  ctx.strokeRect(px(b.xmin), py(b.ymax), (b.xmax - b.xmin) * s,
                 (b.ymax - b.ymin) * s);

  ctx.fillStyle = "#39404f";
  for (const o of snap.world.obstacles) {
    ctx.fillRect(px(o.xmin), py(o.ymax), (o.xmax - o.xmin) * s,
                 (o.ymax - o.ymin) * s);
  }

  for (const [id, obj] of Object.entries(snap.world.objects)) {
    ctx.fillStyle = obj.spent ? "#666" : "#d9524a";
    ctx.fillRect(px(obj.pose.x) - 4, py(obj.pose.y) - 4, 8, 8);
    ctx.fillStyle = "#9aa3b0";
    ctx.fillText(id, px(obj.pose.x) + 6, py(obj.pose.y) - 6);
  }

  for (const [id, agent] of Object.entries(snap.world.agents)) {
    const x = px(agent.pose.x);
    const y = py(agent.pose.y);
    ctx.fillStyle = KIND_COLORS[agent.kind] ?? "#ddd";
    ctx.beginPath();
    ctx.arc(x, y, 6, 0, 2 * Math.PI);
    ctx.fill();
    if (agent.immobilized) {
      ctx.strokeStyle = "#d9524a";
      ctx.beginPath();
      ctx.arc(x, y, 9, 0, 2 * Math.PI);
      ctx.stroke();
    }
    // heading tick (canvas y is flipped, so negate)
    ctx.strokeStyle = "#e8e8e8";
    ctx.beginPath();
    ctx.moveTo(x, y);
    ctx.lineTo(x + 12 * Math.cos(agent.pose.heading),
               y - 12 * Math.sin(agent.pose.heading));
    ctx.stroke();
    ctx.fillStyle = "#cfd6e0";
    ctx.fillText(`${id} ${(agent.battery * 100).toFixed(0)}%`, x + 8, y + 12);
  }

  // recent detections as fading markers instead of video panes
  ctx.fillStyle = "rgba(240, 200, 80, 0.6)";
  for (const det of state.detections.slice(-10)) {
    const target = snap.world.objects[det.targetId] ??
      snap.world.agents[det.targetId];
    if (!target) continue;
    ctx.beginPath();
    ctx.arc(px(target.pose.x), py(target.pose.y), 11, 0, 2 * Math.PI);
    ctx.stroke();
  }
}

function el(tag: string, cls: string, text: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = cls;
  node.textContent = text;
  return node;
}

export function renderMissionPane(root: HTMLElement, state: ConsoleState): void {
  root.replaceChildren();
  const missions = Object.values(state.missions)
    .sort((a, b) => a.missionId.localeCompare(b.missionId));
  if (!missions.length) {
    root.appendChild(el("p", "empty", "no missions yet"));
    return;
  }
  for (const m of missions) {
    const card = el("div", `mission mission-${m.state.toLowerCase()}`, "");
    card.appendChild(el("h3", "", `${m.missionId} — ${m.state}`));
    const line = m.timeline
      .map((t) => `${t.state}@${t.tick}`)
      .join(" → ");
    card.appendChild(el("p", "timeline", line));
    root.appendChild(card);
  }
}

export function renderProposalPane(
  root: HTMLElement, state: ConsoleState,
  onApprove: (id: string) => void, onDismiss: (id: string) => void,
): void {
  root.replaceChildren();
  const proposals = Object.values(state.proposals);
  if (!proposals.length) {
    root.appendChild(el("p", "empty", "no collaboration proposals"));
    return;
  }
  for (const p of proposals) {
    const card = el("div", `proposal proposal-${p.status}`, "");
    card.appendChild(el("p", "",
      `assist ${p.beneficiary} (helper ${p.helper ?? "none"}) — ${p.status}`));
    if (p.status === "pending" && p.feasible) {
      const approve = el("button", "approve", "approve") as HTMLButtonElement;
      approve.onclick = () => onApprove(p.proposalId);
      const dismiss = el("button", "dismiss", "dismiss") as HTMLButtonElement;
      dismiss.onclick = () => onDismiss(p.proposalId);
      card.append(approve, dismiss);
    }
    root.appendChild(card);
  }
}

export function renderRequestPane(
  root: HTMLElement, state: ConsoleState,
  onVerdict: (id: string, verdict: "confirmed" | "denied") => void,
): void {
  root.replaceChildren();
  const open = Object.values(state.requests).filter((r) => !r.answered);
  if (!open.length) {
    root.appendChild(el("p", "empty", "no corroboration requests"));
    return;
  }
  for (const r of open) {
    const expired = requestExpired(r, state.tick);
    const card = el("div", "request", "");
    card.appendChild(el("p", "",
      `${r.requestId}: ${r.subject} by ${r.subjectAgent}`));
    card.appendChild(el("p", "countdown", expired
      ? "deadline passed — Unverified"
      : `${ticksRemaining(r, state.tick)} ticks remaining`));
    const confirm = el("button", "confirm", "confirm") as HTMLButtonElement;
    const deny = el("button", "deny", "deny") as HTMLButtonElement;
    confirm.disabled = deny.disabled = expired;
    confirm.onclick = () => onVerdict(r.requestId, "confirmed");
    deny.onclick = () => onVerdict(r.requestId, "denied");
    card.append(confirm, deny);
    root.appendChild(card);
  }
}

export function renderFeed(root: HTMLElement, state: ConsoleState): void {
  root.replaceChildren();
  const lines = [
    ...state.alerts.map((a) =>
      `ALERT ${a.src}: ${a.alert}` +
      (a.level !== null ? ` (${(a.level * 100).toFixed(0)}%)` : "")),
    ...state.errors.map((e) => `ERROR ${e}`),
    ...state.notices,
  ];
  for (const line of lines.slice(-12)) {
    root.appendChild(el("p", "feed-line", line));
  }
}
