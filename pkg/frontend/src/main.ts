import { GatewayClient } from "./api.js";
import { createConsole } from "./app.js";

// Entry point for the static page. The gateway origin comes from
// ?gateway=http://host:port, defaulting to same-origin.

const params = new URLSearchParams(window.location.search);
const base = params.get("gateway") ?? "";
const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");

const app = createConsole(root, new GatewayClient(base));
void app.refresh();
