// Hub client: owns the websocket session, the outgoing sequence counter and
// the console state. All operator actions go out as protocol frames; state
// only changes when frames (or snapshots) come back.

import { decodeFrame, encodeFrame, Frame, FrameType } from "./protocol.js";
import {
  ConsoleState,
  Proposal,
  Snapshot,
  addNotice,
  applyFrame,
  applySnapshot,
  initialState,
  markProposal,
  markRequestAnswered,
  requestExpired,
} from "./state.js";

/** The slice of the WebSocket API the client needs (browser and `ws` both
 * provide it), so tests can plug in fakes. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: "open" | "message" | "close" | "error",
                   listener: (event: any) => void): void;
}

export type StateListener = (state: ConsoleState) => void;

export const OPERATOR_ID = "operator";

export class HubClient {
  state: ConsoleState = initialState();
  private seq = 0;
  private listeners: StateListener[] = [];
  private pendingTriggers = new Set<string>();
  private snapshotTimer: ReturnType<typeof setInterval> | null = null;

  constructor(private socket: SocketLike) {
    this.state = { ...this.state, connection: "connecting" };
    socket.addEventListener("open", () => this.hello());
    socket.addEventListener("message", (ev) => {
      const data = typeof ev.data === "string" ? ev.data : String(ev.data);
      this.handleMessage(data);
    });
    socket.addEventListener("close", () => {
      this.update({ ...this.state, connection: "disconnected" });
    });
  }

  onChange(listener: StateListener): void {
    this.listeners.push(listener);
  }

  private update(state: ConsoleState): void {
    this.state = state;
    for (const l of this.listeners) l(state);
  }

  private sendFrame(type: FrameType, payload: Record<string, unknown>,
                    dst = "hub"): Frame {
    this.seq += 1;
    const frame: Frame = {
      v: 1, type, seq: this.seq, tick: this.state.tick,
      src: OPERATOR_ID, dst, payload,
    };
    this.socket.send(encodeFrame(frame));
    return frame;
  }

  hello(): void {
    this.sendFrame("HELLO", { agent_id: OPERATOR_ID, kind: "operator" });
  }

  /** Keep the hub heartbeat satisfied between user gestures. */
  heartbeat(): void {
    if (this.state.connection === "connected") {
      this.sendFrame("TELEMETRY", { console: true });
    }
  }

  handleMessage(raw: string): void {
    let frame: Frame;
    try {
      frame = decodeFrame(raw);
    } catch (e) {
      this.update(addNotice(this.state, `undecodable frame: ${e}`));
      return;
    }
    let next = applyFrame(this.state, frame);
    if (frame.type === "MISSION_STATUS") {
      const mtype = String((frame.payload as any).mission_type ?? "");
      this.pendingTriggers.delete(mtype);
    }
    if (frame.type === "ERROR") {
      // a rejected trigger re-enables the buttons
      const reason = String((frame.payload as any).reason ?? "");
      if (reason.includes("trigger rejected")) this.pendingTriggers.clear();
    }
    this.update(next);
  }

  /** True if the trigger button for this mission type should be live. */
  canTrigger(missionType: string): boolean {
    return this.state.connection === "connected" &&
      !this.pendingTriggers.has(missionType);
  }

  /** Debounced: one MISSION_TRIGGER until a MISSION_STATUS (or rejection)
   * arrives for the type. Returns whether a frame went out. */
  triggerMission(missionType: string,
                 extra: Record<string, unknown> = {}): boolean {
    if (!this.canTrigger(missionType)) return false;
    this.pendingTriggers.add(missionType);
    this.sendFrame("MISSION_TRIGGER", { mission_type: missionType, ...extra });
    return true;
  }

  approveProposal(proposal: Proposal): boolean {
    const current = this.state.proposals[proposal.proposalId];
    if (!current || current.status !== "pending") {
      this.update(addNotice(this.state,
        `proposal ${proposal.proposalId} already handled`));
      return false;
    }
    this.update(markProposal(this.state, proposal.proposalId, "approved"));
    this.sendFrame("MISSION_TRIGGER", {
      mission_type: "M3",
      beneficiary: proposal.beneficiary,
      approval_of: proposal.proposalId,
    });
    return true;
  }

  dismissProposal(proposal: Proposal): void {
    this.update(markProposal(this.state, proposal.proposalId, "dismissed"));
  }

  submitVerdict(requestId: string, verdict: "confirmed" | "denied"): boolean {
    const req = this.state.requests[requestId];
    if (!req || req.answered || requestExpired(req, this.state.tick)) {
      return false;
    }
    this.update(markRequestAnswered(this.state, requestId));
    this.sendFrame("CORR_VERDICT", { request_id: requestId, verdict });
    return true;
  }

  aerialAgents(): string[] {
    const sessions = this.state.snapshot?.sessions ?? [];
    return sessions.filter((s) => s.kind === "aerial").map((s) => s.agent_id);
  }

  /** follow(target) / hold; addressed straight to the aerial agent. */
  steerDrone(aerialId: string, target: string | null): boolean {
    if (this.state.connection !== "connected") return false;
    const payload = target === null
      ? { verb: "hold" }
      : { verb: "follow", target };
    this.sendFrame("COMMAND", payload, aerialId);
    return true;
  }

  /** 2 Hz GET /snapshot fallback; fetchFn is injectable for tests. */
  startSnapshotPolling(
    fetchFn: () => Promise<Snapshot>, intervalMs = 500,
  ): void {
    this.stopSnapshotPolling();
    this.snapshotTimer = setInterval(async () => {
      try {
        const snap = await fetchFn();
        this.update(applySnapshot(this.state, snap));
      } catch {
        // transient; the websocket stream keeps the state fresh
      }
    }, intervalMs);
  }

  stopSnapshotPolling(): void {
    if (this.snapshotTimer !== null) {
      clearInterval(this.snapshotTimer);
      this.snapshotTimer = null;
    }
  }

  bye(): void {
    if (this.state.connection === "connected") {
      this.sendFrame("BYE", {});
    }
    this.stopSnapshotPolling();
    this.socket.close();
  }
}
