export * from "./protocol";
export * from "./backoff";
export * from "./throttle";
export * from "./transport";
export * from "./client";
export * from "./view";
// transport-node is not re-exported: it pulls in node:net, which a
// browser bundle must never see.  Import it by path where needed.
