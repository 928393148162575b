import { MasterClient } from "./api.js";
import { createApp } from "./app.js";

// Served by the master under /ui, so the API lives at the same origin;
// ?master=http://host:port overrides that for development.
const override = new URLSearchParams(window.location.search).get("master");
const baseUrl = override ? override.replace(/\/$/, "") : "";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");
createApp(root, new MasterClient(baseUrl));
