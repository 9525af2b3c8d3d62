import { ApiClient } from './api.js';
import { EditorStore } from './store.js';
import { bindUi } from './ui.js';

const params = new URLSearchParams(window.location.search);
const base = params.get('service') ?? 'http://127.0.0.1:8765';

const api = new ApiClient(base);
const store = new EditorStore(api);
bindUi(document, store, api);
void store.start();
