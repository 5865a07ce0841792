import { describe, expect, it } from "vitest";

import { HubClient, SocketLike } from "../src/client.js";
import { Frame, FrameType, decodeFrame, encodeFrame } from "../src/protocol.js";
import type { Snapshot } from "../src/state.js";

class FakeSocket implements SocketLike {
  sent: Frame[] = [];
  closed = false;
  private listeners: Record<string, ((event: any) => void)[]> = {};

  send(data: string): void {
    this.sent.push(decodeFrame(data));
  }

  close(): void {
    this.closed = true;
    this.emit("close", {});
  }

  addEventListener(type: string, listener: (event: any) => void): void {
    (this.listeners[type] ??= []).push(listener);
  }

  emit(type: string, event: any): void {
    for (const l of this.listeners[type] ?? []) l(event);
  }

  receive(frame: Frame): void {
    this.emit("message", { data: encodeFrame(frame) });
  }
}

let hubSeq = 0;
function hubFrame(type: FrameType, tick: number,
                  payload: Record<string, unknown>, dst = "operator"): Frame {
  hubSeq += 1;
  return { v: 1, type, seq: hubSeq, tick, src: "hub", dst, payload };
}

function connectedClient(): { client: HubClient; socket: FakeSocket } {
  const socket = new FakeSocket();
  const client = new HubClient(socket);
  socket.emit("open", {});
  socket.receive(hubFrame("WELCOME", 0,
    { agent_id: "operator", tick_dt: 0.1, detection_threshold: 0.6 }));
  return { client, socket };
}

describe("session", () => {
  it("says hello on open and tracks connection", () => {
    const { client, socket } = connectedClient();
    expect(socket.sent[0].type).toBe("HELLO");
    expect(socket.sent[0].payload.agent_id).toBe("operator");
    expect(client.state.connection).toBe("connected");
  });

  it("outgoing sequence numbers are gapless from 1", () => {
    const { client, socket } = connectedClient();
    client.triggerMission("M1");
    client.heartbeat();
    expect(socket.sent.map((f) => f.seq)).toEqual([1, 2, 3]);
  });
});

describe("mission trigger debounce", () => {
  it("double trigger sends exactly one frame", () => {
    const { client, socket } = connectedClient();
    expect(client.triggerMission("M1")).toBe(true);
    expect(client.triggerMission("M1")).toBe(false);
    const triggers = socket.sent.filter((f) => f.type === "MISSION_TRIGGER");
    expect(triggers).toHaveLength(1);
  });

  it("re-enables once a status for the type arrives", () => {
    const { client, socket } = connectedClient();
    client.triggerMission("M1");
    socket.receive(hubFrame("MISSION_STATUS", 12, {
      mission_id: "M1-001", mission_type: "M1", state: "Triggered",
      event: "triggered", participants: ["spot"], executor: "spot",
    }, "*"));
    expect(client.canTrigger("M1")).toBe(true);
  });

  it("re-enables on a trigger rejection, and renders the reason", () => {
    const { client, socket } = connectedClient();
    client.triggerMission("M3");
    socket.receive(hubFrame("ERROR", 12,
      { reason: "trigger rejected: missing beneficiary (wheeled) for M3" }));
    expect(client.canTrigger("M3")).toBe(true);
    expect(client.state.errors[0]).toContain("trigger rejected");
  });

  it("refuses to trigger while disconnected", () => {
    const socket = new FakeSocket();
    const client = new HubClient(socket);
    expect(client.triggerMission("M1")).toBe(false);
    expect(socket.sent).toHaveLength(0);
  });
});

describe("proposal approval", () => {
  function proposalFrame() {
    return hubFrame("EVENT", 40, {
      event: "collaboration_proposal", proposal_id: "prop-husky-40",
      beneficiary: "husky", helper: "spot", feasible: true,
    }, "*");
  }

  it("approve sends an M3 trigger naming the proposal", () => {
    const { client, socket } = connectedClient();
    socket.receive(proposalFrame());
    const ok = client.approveProposal(client.state.proposals["prop-husky-40"]);
    expect(ok).toBe(true);
    const trigger = socket.sent.find((f) => f.type === "MISSION_TRIGGER")!;
    expect(trigger.payload.mission_type).toBe("M3");
    expect(trigger.payload.beneficiary).toBe("husky");
    expect(trigger.payload.approval_of).toBe("prop-husky-40");
  });

  it("approving a stale proposal is a no-op with a notice", () => {
    const { client, socket } = connectedClient();
    socket.receive(proposalFrame());
    // the hub's auto-approve already fired: an M3 covers husky
    socket.receive(hubFrame("MISSION_STATUS", 45, {
      mission_id: "M3-001", mission_type: "M3", state: "SearchBattery",
      event: "approved", participants: ["spot", "husky"], executor: "spot",
    }, "*"));
    const before = socket.sent.length;
    const ok = client.approveProposal(client.state.proposals["prop-husky-40"]);
    expect(ok).toBe(false);
    expect(socket.sent).toHaveLength(before);
    expect(client.state.notices.some((n) => n.includes("already handled")))
      .toBe(true);
  });

  it("dismiss archives without a mission", () => {
    const { client, socket } = connectedClient();
    socket.receive(proposalFrame());
    client.dismissProposal(client.state.proposals["prop-husky-40"]);
    expect(client.state.proposals["prop-husky-40"].status).toBe("dismissed");
    expect(socket.sent.filter((f) => f.type === "MISSION_TRIGGER"))
      .toHaveLength(0);
  });
});

describe("corroboration verdicts", () => {
  function requestFrame() {
    return hubFrame("CORR_REQUEST", 100, {
      request_id: "corr-0001", mission_id: "M1-001", subject: "M1:trace",
      subject_agent: "spot", deadline_tick: 400,
    });
  }

  it("sends a verdict once per request", () => {
    const { client, socket } = connectedClient();
    socket.receive(requestFrame());
    expect(client.submitVerdict("corr-0001", "confirmed")).toBe(true);
    expect(client.submitVerdict("corr-0001", "confirmed")).toBe(false);
    const verdicts = socket.sent.filter((f) => f.type === "CORR_VERDICT");
    expect(verdicts).toHaveLength(1);
    expect(verdicts[0].payload.verdict).toBe("confirmed");
  });

  it("blocks verdicts after the deadline", () => {
    const { client, socket } = connectedClient();
    socket.receive(requestFrame());
    socket.receive(hubFrame("EVENT", 401, { event: "swap_started" }, "*"));
    expect(client.submitVerdict("corr-0001", "denied")).toBe(false);
    expect(socket.sent.filter((f) => f.type === "CORR_VERDICT"))
      .toHaveLength(0);
  });
});

describe("drone steering", () => {
  it("routes follow and hold to the aerial agent", () => {
    const { client, socket } = connectedClient();
    client.steerDrone("tello", "spot");
    client.steerDrone("tello", null);
    const commands = socket.sent.filter((f) => f.type === "COMMAND");
    expect(commands.map((f) => f.dst)).toEqual(["tello", "tello"]);
    expect(commands[0].payload).toEqual({ verb: "follow", target: "spot" });
    expect(commands[1].payload).toEqual({ verb: "hold" });
  });

  it("lists aerial agents from the snapshot for the UI guard", () => {
    const { client } = connectedClient();
    expect(client.aerialAgents()).toEqual([]);
    const snap = {
      tick: 10, world: { bounds: { xmin: 0, ymin: 0, xmax: 1, ymax: 1 },
      obstacles: [], agents: {}, objects: {} },
      missions: [], sessions: [
        { agent_id: "tello", kind: "aerial" },
        { agent_id: "spot", kind: "quadruped" },
      ], proposals: [], open_requests: [], telemetry: {},
    } as unknown as Snapshot;
    client.state = { ...client.state, snapshot: snap };
    expect(client.aerialAgents()).toEqual(["tello"]);
  });
});
